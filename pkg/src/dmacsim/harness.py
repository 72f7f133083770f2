"""Scenario definitions, workload generation and the experiment runners.

A scenario is a controller configuration, a memory configuration and a
workload.  Running it preloads descriptors and payload through the memory
backdoor, launches every chain with one CSR write, simulates to completion,
checks memory integrity and condenses the traces into a :class:`RunReport`.
"""

from __future__ import annotations

import configparser
import csv
import io
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

from .backend import BackendConfig, TransferRecord
from .baseline import BaselineConfig
from .descriptor import (DESCRIPTOR_SIZE, IRQ_ON_COMPLETION, DescriptorChain, Placement,
                         build_chain, encode)
from .frontend import MARKER, FrontendConfig
from .memory import MemoryConfig, PayloadClass
from .metrics import (CSV_COLUMNS, MeasurementWindow, RunReport, ideal_utilization,
                      latency_probes, measure_utilization, payload_read_spans)
from .testbench import DmacConfig, MainConfig, Testbench

# the predefined controller configurations
PRESETS: dict[str, DmacConfig] = {
    "base": MainConfig(FrontendConfig(descriptors_in_flight=4, prefetch_slots=0),
                       BackendConfig(queue_depth=4)),
    "speculation": MainConfig(FrontendConfig(descriptors_in_flight=4, prefetch_slots=4),
                              BackendConfig(queue_depth=4)),
    "scaled": MainConfig(FrontendConfig(descriptors_in_flight=24, prefetch_slots=24),
                         BackendConfig(queue_depth=24)),
    "baseline": BaselineConfig(),
}

# the three memory regimes, as one-way latency in cycles
MEMORY_LATENCIES = {"ideal": 1, "ddr3": 13, "far": 100}

DEFAULT_SIZES = tuple(2 ** k for k in range(3, 13))   # 8 B .. 4 KiB

DESCRIPTOR_BASE = 0x1000
REGION_ALIGN = 0x10000
BUFFER_ALIGN = 64
# a misprediction jumps at least this many records past the predicted address,
# beyond the reach of any speculation window
MIN_JUMP_RECORDS = 32
MAX_JUMP_RECORDS = 64


class IntegrityError(AssertionError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    transfer_count: int = 280
    sizes: tuple[int, ...] = (64,)
    placement: str = "sequential"      # or "randomized"
    hit_rate: float = 1.0
    chains: int = 1
    irq: str = "last"                  # none | last | all

    def __post_init__(self):
        if self.transfer_count < 1 or self.chains < 1 or self.chains > self.transfer_count:
            raise ConfigError("need 1 <= chains <= transfer_count")
        if not self.sizes or any(n < 0 for n in self.sizes):
            raise ConfigError("sizes must be a non-empty list of non-negative byte counts")
        if self.placement not in ("sequential", "randomized"):
            raise ConfigError(f"unknown placement {self.placement!r}")
        if not 0.0 <= self.hit_rate <= 1.0:
            raise ConfigError("hit_rate must lie in [0, 1]")
        if self.irq not in ("none", "last", "all"):
            raise ConfigError(f"unknown irq mode {self.irq!r}")

    @property
    def size_label(self) -> str:
        if len(self.sizes) == 1:
            return str(self.sizes[0])
        return "set:" + "/".join(str(n) for n in self.sizes)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dmac: DmacConfig
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    seed: int = 1
    window: MeasurementWindow = field(default_factory=MeasurementWindow)

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


def scenario(preset: str, latency: int = 1, size: int | Sequence[int] = 64, *,
             hit_rate: float = 1.0, seed: int = 1, **workload) -> ScenarioConfig:
    """Shorthand for a predefined configuration in one memory regime."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    sizes = (size,) if isinstance(size, int) else tuple(size)
    if hit_rate < 1.0:
        workload.setdefault("placement", "randomized")
    spec = WorkloadSpec(sizes=sizes, hit_rate=hit_rate, **workload)
    return ScenarioConfig(preset, PRESETS[preset], MemoryConfig(one_way_latency=latency),
                          spec, seed)


# ------------------------------------------------------------------ workload
@dataclass
class Workload:
    chains: list[DescriptorChain]
    sources: dict[int, bytes]          # source address -> payload bytes
    miss_links: int = 0

    @property
    def descriptors(self):
        return [(a, d) for ch in self.chains for a, d in ch.entries]


def _align(x: int, a: int) -> int:
    return -(-x // a) * a


def _chain_lengths(total: int, chains: int) -> list[int]:
    base, extra = divmod(total, chains)
    return [base + (1 if i < extra else 0) for i in range(chains)]


def build_workload(spec: WorkloadSpec, seed: int, memory: MemoryConfig) -> Workload:
    """Lay out descriptors and payload buffers deterministically from ``seed``."""
    rng = random.Random(seed)
    n = spec.transfer_count
    sizes = [spec.sizes[0] if len(spec.sizes) == 1 else rng.choice(spec.sizes) for _ in range(n)]

    # descriptor placement
    lengths = _chain_lengths(n, spec.chains)
    addresses: list[list[int]] = []
    cursor = DESCRIPTOR_BASE
    miss_links = 0
    for count in lengths:
        links = count - 1
        if spec.placement == "randomized":
            misses = round((1.0 - spec.hit_rate) * links)
            missed = set(rng.sample(range(links), misses))
        else:
            missed = set()
        miss_links += len(missed)
        addrs = [cursor]
        for i in range(links):
            step = DESCRIPTOR_SIZE
            if i in missed:
                step += DESCRIPTOR_SIZE * rng.randint(MIN_JUMP_RECORDS, MAX_JUMP_RECORDS)
            addrs.append(addrs[-1] + step)
        addresses.append(addrs)
        # leave a gap so speculation past one chain's end never reads the next chain
        cursor = addrs[-1] + DESCRIPTOR_SIZE * (MAX_JUMP_RECORDS + 1)

    src_base = _align(cursor, REGION_ALIGN)
    span = sum(_align(max(s, 1), BUFFER_ALIGN) for s in sizes)
    dst_base = _align(src_base + span, REGION_ALIGN)
    if dst_base + span > memory.capacity:
        raise ConfigError(f"workload needs {dst_base + span:#x} bytes, memory has "
                          f"{memory.capacity:#x}")

    sources: dict[int, bytes] = {}
    chains = []
    k = 0
    off = 0
    for ci, addrs in enumerate(addresses):
        transfers = []
        for j in range(len(addrs)):
            size = sizes[k]
            src, dst = src_base + off, dst_base + off
            sources[src] = rng.randbytes(size)
            last = j == len(addrs) - 1
            irq = spec.irq == "all" or (spec.irq == "last" and last)
            transfers.append((src, dst, size, IRQ_ON_COMPLETION if irq else 0))
            off += _align(max(size, 1), BUFFER_ALIGN)
            k += 1
        chains.append(build_chain(transfers, addrs[0], Placement.EXPLICIT, addrs))
    return Workload(chains, sources, miss_links)


def preload(tb: Testbench, workload: Workload) -> None:
    for ch in workload.chains:
        tb.load_chain(ch)
    for src, data in workload.sources.items():
        tb.memory.backdoor_write(src, data)


def check_integrity(tb: Testbench, workload: Workload) -> None:
    """Destination equals source for every transfer; markers where expected."""
    mem = tb.memory
    problems = []
    for addr, d in workload.descriptors:
        got = mem.backdoor_read(d.destination, d.length)
        if got != workload.sources[d.source]:
            problems.append(f"payload mismatch for descriptor {addr:#x}")
        record = mem.backdoor_read(addr, DESCRIPTOR_SIZE)
        original = encode(d)
        if tb.is_baseline:
            if record != original:
                problems.append(f"descriptor {addr:#x} modified by the baseline")
        else:
            if record[:8] != MARKER:
                problems.append(f"descriptor {addr:#x} lacks the completion marker")
            if record[8:] != original[8:]:
                problems.append(f"descriptor {addr:#x} bytes 8-31 corrupted")
    if problems:
        raise IntegrityError(f"{len(problems)} integrity failures, first: {problems[0]}")


# ------------------------------------------------------------------ running
@dataclass
class RunResult:
    config: ScenarioConfig
    report: RunReport
    testbench: Testbench
    workload: Workload


def build_report(cfg: ScenarioConfig, tb: Testbench, total_cycles: int) -> RunReport:
    L = cfg.memory.one_way_latency
    fe = tb.frontend
    spans = payload_read_spans(tb.arbiter.grants, L, port=tb.backend.port)
    util = measure_utilization(tb.transfers, spans, cfg.window)
    by_class = {c.value: 0 for c in PayloadClass}
    for g in tb.arbiter.grants:
        by_class[g.payload_class] += g.beats
    wasted = sum(f.txn.beats for f in fe.discarded if f.txn is not None)
    i_rf, rf_rb, r_w = latency_probes(fe.csr_accepts, [e.cycle for e in fe.fetch_log],
                                      tb.transfers)
    sizes = cfg.workload.sizes
    mean = sum(sizes) / len(sizes)
    return RunReport(
        config=cfg.name, latency=L, size=cfg.workload.size_label,
        hit_rate=cfg.workload.hit_rate, steady_state_utilization=util,
        payload_beats=by_class[PayloadClass.PAYLOAD.value],
        descriptor_beats=by_class[PayloadClass.DESCRIPTOR.value] - wasted,
        wasted_beats=wasted, writeback_beats=by_class[PayloadClass.WRITEBACK.value],
        i_rf=i_rf, rf_rb=rf_rb, r_w=r_w, miss_count=fe.misses, hit_count=fe.hits,
        total_cycles=total_cycles, transfers=len(tb.transfers),
        ideal_utilization=ideal_utilization(mean),
        total_beats=sum(g.beats for g in tb.arbiter.grants))


def run_scenario(cfg: ScenarioConfig, record_trace: bool = False,
                 max_cycles: int = 50_000_000) -> RunResult:
    tb = Testbench(cfg.dmac, cfg.memory, record_trace=record_trace)
    workload = build_workload(cfg.workload, cfg.seed, cfg.memory)
    preload(tb, workload)
    for ch in workload.chains:
        tb.launch(ch.head_address)
    cycles = tb.run(max_cycles)
    check_integrity(tb, workload)
    return RunResult(cfg, build_report(cfg, tb, cycles), tb, workload)


def architectural_issue_lags(transfers: Iterable[TransferRecord], prev_known: dict[int, int],
                             only_after_miss: bool = False) -> dict[int, int]:
    """Cycles from "next pointer known" to the read that follows it, per position.

    ``prev_known`` maps a chain position to the cycle its successor's address
    became known.  Only transfers reached by an architectural (non-speculative)
    read are reported.
    """
    lags = {}
    for rec in transfers:
        if rec.position == 0 or rec.speculative_hit:
            continue
        if only_after_miss and not rec.after_miss:
            continue
        lags[rec.position] = rec.fetch_issue_cycle - prev_known[rec.position - 1]
    return lags


def next_known_by_position(transfers: Iterable[TransferRecord]) -> dict[int, int]:
    return {rec.position: rec.next_known_cycle for rec in transfers}


# ------------------------------------------------------------------ config files
def _dump_dataclass(obj) -> dict[str, str]:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = ",".join(str(x) for x in v) if isinstance(v, tuple) else str(v)
    return out


def _load_dataclass(cls, section) -> object:
    kwargs = {}
    defaults = cls()
    for f in fields(cls):
        if f.name not in section:
            continue
        raw = section[f.name]
        default = getattr(defaults, f.name)
        if isinstance(default, tuple):
            kwargs[f.name] = tuple(int(x) for x in raw.split(",") if x.strip())
        elif isinstance(default, bool):
            kwargs[f.name] = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(default, float):
            kwargs[f.name] = float(raw)
        elif isinstance(default, int):
            kwargs[f.name] = int(raw, 0)
        else:
            kwargs[f.name] = raw
    unknown = set(section) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown keys in [{section.name}]: {sorted(unknown)}")
    return cls(**kwargs)


def to_ini(cfg: ScenarioConfig) -> str:
    cp = configparser.ConfigParser()
    cp["scenario"] = {"name": cfg.name, "seed": str(cfg.seed)}
    if isinstance(cfg.dmac, BaselineConfig):
        cp["dmac"] = {"kind": "baseline", **_dump_dataclass(cfg.dmac)}
    else:
        cp["dmac"] = {"kind": "main", **_dump_dataclass(cfg.dmac.frontend)}
        cp["backend"] = _dump_dataclass(cfg.dmac.backend)
    cp["memory"] = _dump_dataclass(cfg.memory)
    cp["workload"] = _dump_dataclass(cfg.workload)
    cp["window"] = _dump_dataclass(cfg.window)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> ScenarioConfig:
    """Parse a scenario file.  ``preset = name`` in [dmac] pulls in a predefined configuration."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    for sec in cp.sections():
        if sec not in ("scenario", "dmac", "backend", "memory", "workload", "window"):
            raise ConfigError(f"unknown section [{sec}]")
    scen = cp["scenario"] if cp.has_section("scenario") else {}
    dmac_sec = dict(cp["dmac"]) if cp.has_section("dmac") else {"preset": "base"}
    preset = dmac_sec.pop("preset", None)
    kind = dmac_sec.pop("kind", None)
    cp["dmac"] = dmac_sec
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        dmac = PRESETS[preset]
        if dmac_sec:
            raise ConfigError("[dmac] cannot combine preset with explicit fields")
    elif kind == "baseline":
        dmac = _load_dataclass(BaselineConfig, cp["dmac"])
    elif kind == "main":
        fe = _load_dataclass(FrontendConfig, cp["dmac"])
        be = (_load_dataclass(BackendConfig, cp["backend"]) if cp.has_section("backend")
              else BackendConfig(queue_depth=fe.descriptors_in_flight))
        dmac = MainConfig(fe, be)
    else:
        raise ConfigError("[dmac] needs either preset or kind = main|baseline")
    memory = _load_dataclass(MemoryConfig, cp["memory"]) if cp.has_section("memory") else MemoryConfig()
    workload = (_load_dataclass(WorkloadSpec, cp["workload"]) if cp.has_section("workload")
                else WorkloadSpec())
    window = (_load_dataclass(MeasurementWindow, cp["window"]) if cp.has_section("window")
              else MeasurementWindow())
    name = scen.get("name", preset or kind)
    seed = int(scen.get("seed", "1"), 0)
    return ScenarioConfig(name, dmac, memory, workload, seed, window)


# ------------------------------------------------------------------ experiments
def _run_cell(cfg: ScenarioConfig) -> RunReport:
    try:
        return run_scenario(cfg).report
    except Exception as exc:
        raise RuntimeError(f"cell {cfg.name} L={cfg.memory.one_way_latency} "
                           f"n={cfg.workload.size_label} hit={cfg.workload.hit_rate}: {exc}") from exc


def run_cells(cells: Sequence[ScenarioConfig], jobs: int = 1) -> list[RunReport]:
    """Run independent scenarios, in parallel when ``jobs > 1``; rows come back sorted."""
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_cell, cells))
    else:
        reports = [_run_cell(c) for c in cells]
    order = list(PRESETS)
    def key(r: RunReport):
        rank = order.index(r.config) if r.config in order else len(order)
        size = int(r.size) if r.size.isdigit() else -1
        return (r.latency, rank, r.config, size, r.size, r.hit_rate)
    return sorted(reports, key=key)


def sweep_cells(template: ScenarioConfig | None, configs: Sequence[str], sizes: Sequence[int],
                latencies: Sequence[int], seed: int | None = None) -> list[ScenarioConfig]:
    template = template or ScenarioConfig("base", PRESETS["base"])
    cells = []
    for L in latencies:
        for name in configs:
            for n in sizes:
                cells.append(replace(
                    template, name=name, dmac=PRESETS[name],
                    memory=replace(template.memory, one_way_latency=L),
                    workload=replace(template.workload, sizes=(n,)),
                    seed=template.seed if seed is None else seed))
    return cells


def miss_sweep_cells(template: ScenarioConfig | None, hit_rates: Sequence[float],
                     sizes: Sequence[int], latency: int = 13, config: str = "speculation",
                     seed: int | None = None) -> list[ScenarioConfig]:
    dmac = PRESETS[config]
    if isinstance(dmac, BaselineConfig) or dmac.frontend.prefetch_slots == 0:
        raise ConfigError("a miss sweep needs a configuration with speculation slots")
    template = template or ScenarioConfig(config, dmac)
    cells = []
    for h in hit_rates:
        for n in sizes:
            cells.append(replace(
                template, name=config, dmac=dmac,
                memory=replace(template.memory, one_way_latency=latency),
                workload=replace(template.workload, sizes=(n,), hit_rate=h,
                                 placement="sequential" if h == 1.0 else "randomized"),
                seed=template.seed if seed is None else seed))
    return cells


def latency_table(latencies: Sequence[int] = (1, 13, 100)) -> dict[str, tuple[int, ...]]:
    """``name -> (i_rf, rf_rb at each latency..., r_w)`` from single-transfer runs."""
    table = {}
    for name in ("scaled", "baseline"):
        rf_rbs = []
        i_rf = r_w = None
        for L in latencies:
            cfg = scenario(name, L, 64, transfer_count=1)
            tb = Testbench(cfg.dmac, cfg.memory)
            wl = build_workload(cfg.workload, cfg.seed, cfg.memory)
            preload(tb, wl)
            tb.launch(wl.chains[0].head_address)
            tb.run()
            check_integrity(tb, wl)
            fe = tb.frontend
            i_rf, rf_rb, r_w = latency_probes(fe.csr_accepts, [e.cycle for e in fe.fetch_log],
                                              tb.transfers)
            rf_rbs.append(rf_rb)
        table[name] = (i_rf, *rf_rbs, r_w)
    return table


PRESET_POINTS = {(4, 0): "base", (4, 4): "speculation", (24, 24): "scaled"}


def area_table(d_values: Iterable[int], s_values: Iterable[int]) -> list[tuple[int, int, float, str]]:
    from .metrics import estimate_area
    rows = []
    for d in d_values:
        for s in s_values:
            rows.append((d, s, estimate_area(d, s), PRESET_POINTS.get((d, s), "")))
    return rows


def reports_csv(reports: Iterable[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()
