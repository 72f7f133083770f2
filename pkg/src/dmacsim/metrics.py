"""Utilization, latency probes, the ideal-utilization law and the area model."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

from .backend import TransferRecord
from .descriptor import DESCRIPTOR_SIZE
from .interconnect import Grant
from .memory import Kind, PayloadClass

AREA_FIXED_KGE = 20.30
AREA_PER_DESCRIPTOR_KGE = 5.28
AREA_PER_SLOT_KGE = 1.94


class ProbeError(LookupError):
    pass


class WindowError(ValueError):
    pass


def ideal_utilization(n: float) -> float:
    """Upper bound on payload utilization when every transfer costs one descriptor."""
    if n < 0:
        raise ValueError("transfer size must be non-negative")
    if n == 0:
        return 0.0
    return n / (n + DESCRIPTOR_SIZE)


def wasted_bound(n: float, wasted_fetches_per_transfer: float) -> float:
    """Ideal utilization when each transfer also drags along discarded fetches."""
    if n == 0:
        return 0.0
    return n / (n + DESCRIPTOR_SIZE * (1 + wasted_fetches_per_transfer))


def estimate_area(d: int, s: int) -> float:
    """Fitted controller area in kGE for ``d`` descriptors in flight, ``s`` slots."""
    if d < 1 or s < 0:
        raise ValueError("need d >= 1 and s >= 0")
    # coefficients carry two decimals; work in hundredths to stay exact
    hundredths = 2030 + 528 * d + 194 * s
    return hundredths / 100


@dataclass(frozen=True)
class MeasurementWindow:
    warmup_transfers: int = 16
    measured_transfers: int = 256

    def __post_init__(self):
        if self.warmup_transfers < 0 or self.measured_transfers < 1:
            raise ValueError("invalid measurement window")

    @property
    def required_transfers(self) -> int:
        return self.warmup_transfers + self.measured_transfers + 1


def payload_read_spans(grants: Iterable[Grant], one_way_latency: int,
                       port: str = "be") -> list[tuple[int, int]]:
    """``[first, last]`` beat cycles of every payload read burst on ``port``."""
    spans = []
    for g in grants:
        if g.kind is Kind.READ and g.port == port and g.payload_class == PayloadClass.PAYLOAD.value:
            first = g.cycle + 2 * one_way_latency
            spans.append((first, first + g.beats - 1))
    return spans


def measure_utilization(transfers: Sequence[TransferRecord], spans: Sequence[tuple[int, int]],
                        window: MeasurementWindow) -> float:
    """Payload read beats per cycle over the steady-state window.

    The window opens on the first payload beat of transfer ``warmup`` and
    closes just before the first payload beat of the transfer following the
    measured ones, so it covers whole transfer periods.
    """
    moving = [t for t in transfers if t.descriptor.length > 0 and t.first_read_beat is not None]
    if len(moving) < window.required_transfers:
        raise WindowError(
            f"window needs {window.required_transfers} payload transfers, run has {len(moving)}")
    start = moving[window.warmup_transfers].first_read_beat
    stop = moving[window.warmup_transfers + window.measured_transfers].first_read_beat
    if stop <= start:
        raise WindowError("empty measurement window")
    beats = 0
    for first, last in spans:
        lo, hi = max(first, start), min(last, stop - 1)
        if hi >= lo:
            beats += hi - lo + 1
    return beats / (stop - start)


def latency_probes(csr_accepts: Sequence[tuple[int, int]], fetch_cycles: Sequence[int],
                   transfers: Sequence[TransferRecord]) -> tuple[int, int, int]:
    """``(i_rf, rf_rb, r_w)`` measured on the first launched transfer."""
    if not csr_accepts or not fetch_cycles or not transfers:
        raise ProbeError("no transfer ran; latency probes are undefined")
    first = transfers[0]
    if first.dispatch_cycle is None:
        raise ProbeError("first transfer never reached the backend")
    i_rf = fetch_cycles[0] - csr_accepts[0][0]
    rf_rb = first.dispatch_cycle - fetch_cycles[0]
    moving = [t for t in transfers if t.first_read_beat is not None and t.first_write_beat is not None]
    if not moving:
        raise ProbeError("no payload beats observed")
    r_w = moving[0].first_write_beat - moving[0].first_read_beat
    return i_rf, rf_rb, r_w


CSV_COLUMNS = ("config", "L", "n", "hit_rate", "utilization", "i_rf", "rf_rb", "r_w",
               "payload_beats", "descriptor_beats", "wasted_beats", "writeback_beats")


@dataclass
class RunReport:
    config: str
    latency: int
    size: str
    hit_rate: float
    steady_state_utilization: float
    payload_beats: int
    descriptor_beats: int
    wasted_beats: int
    writeback_beats: int
    i_rf: int
    rf_rb: int
    r_w: int
    miss_count: int
    hit_count: int
    total_cycles: int
    transfers: int
    ideal_utilization: float
    total_beats: int = 0

    def __post_init__(self):
        if not 0.0 <= self.steady_state_utilization <= 1.0:
            raise ValueError(f"utilization {self.steady_state_utilization} outside [0, 1]")

    def csv_row(self) -> list[str]:
        return [self.config, str(self.latency), self.size, f"{self.hit_rate:g}",
                f"{self.steady_state_utilization:.6f}", str(self.i_rf), str(self.rf_rb),
                str(self.r_w), str(self.payload_beats), str(self.descriptor_beats),
                str(self.wasted_beats), str(self.writeback_beats)]

    def to_text(self) -> str:
        """Flat ``key = value`` record, one field per line."""
        lines = []
        for k, v in asdict(self).items():
            lines.append(f"{k} = {v:.6f}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunReport":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            k, _, v = line.partition("=")
            k, v = k.strip(), v.strip()
            t = types[k]
            values[k] = v if t == "str" else float(v) if t == "float" else int(v)
        return cls(**values)
