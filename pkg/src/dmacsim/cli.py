"""``dmacsim`` command line: run, sweep, miss-sweep, latency, area, selftest."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import harness
from .checks import run_all
from .metrics import RunReport, WindowError
from .sim_core import SimulationExhausted

log = logging.getLogger("dmacsim")


def _ints(text: str) -> list[int]:
    return [int(x, 0) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _names(text: str) -> list[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    for n in names:
        if n not in harness.PRESETS:
            raise argparse.ArgumentTypeError(f"unknown configuration {n!r}")
    return names


def _load_template(path: str | None, seed: int | None) -> harness.ScenarioConfig | None:
    if path is None:
        return None
    cfg = harness.from_ini(Path(path).read_text())
    return replace(cfg, seed=seed) if seed is not None else cfg


def _emit(reports: list[RunReport], args, stem: str) -> None:
    text = harness.reports_csv(reports)
    if args.csv:
        sys.stdout.write(text)
    else:
        _print_summary(reports)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.csv").write_text(text)
        log.info("wrote %s", out / f"{stem}.csv")


def _print_summary(reports: list[RunReport]) -> None:
    print(f"{'config':<12} {'L':>4} {'n':>6} {'hit':>5} {'util':>7} {'ideal':>7} {'misses':>6}")
    for r in reports:
        print(f"{r.config:<12} {r.latency:>4} {r.size:>6} {r.hit_rate:>5.2f} "
              f"{r.steady_state_utilization:>7.4f} {r.ideal_utilization:>7.4f} {r.miss_count:>6}")


def cmd_run(args) -> int:
    if args.config:
        cfg = _load_template(args.config, args.seed)
    else:
        cfg = harness.scenario(args.preset, args.latency, args.size,
                               hit_rate=args.hit_rate, seed=args.seed or 1)
    result = harness.run_scenario(cfg)
    report = result.report
    if args.csv:
        sys.stdout.write(harness.reports_csv([report]))
    else:
        sys.stdout.write(report.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text())
        (out / "run.csv").write_text(harness.reports_csv([report]))
        (out / "grants.csv").write_text(result.testbench.arbiter.grant_trace_csv())
        (out / "scenario.ini").write_text(harness.to_ini(cfg))
    return 0


def cmd_sweep(args) -> int:
    template = _load_template(args.config, args.seed)
    if template is not None and args.transfers:
        template = replace(template, workload=replace(template.workload,
                                                      transfer_count=args.transfers))
    elif args.transfers:
        template = harness.ScenarioConfig("base", harness.PRESETS["base"],
                                          workload=harness.WorkloadSpec(transfer_count=args.transfers))
    cells = harness.sweep_cells(template, args.configs, args.sizes, args.latencies, args.seed)
    reports = harness.run_cells(cells, args.jobs)
    _emit(reports, args, "sweep")
    if args.plots:
        from .plots import plot_sweep
        for p in plot_sweep(reports, Path(args.out or ".")):
            log.info("wrote %s", p)
    return 0


def cmd_miss_sweep(args) -> int:
    template = _load_template(args.config, args.seed)
    cells = harness.miss_sweep_cells(template, args.hit_rates, args.sizes, args.latency,
                                     args.preset, args.seed)
    reports = harness.run_cells(cells, args.jobs)
    _emit(reports, args, "miss_sweep")
    if args.plots:
        from .plots import plot_miss_sweep
        log.info("wrote %s", plot_miss_sweep(reports, Path(args.out or ".")))
    return 0


def cmd_latency(args) -> int:
    table = harness.latency_table(args.latencies)
    cols = ["i_rf"] + [f"rf_rb@L{L}" for L in args.latencies] + ["r_w"]
    if args.csv:
        print(",".join(["dmac"] + cols))
        for name, row in table.items():
            print(",".join([name] + [str(v) for v in row]))
    else:
        print(f"{'dmac':<10}" + "".join(f"{c:>11}" for c in cols))
        for name, row in table.items():
            label = "main" if name == "scaled" else name
            print(f"{label:<10}" + "".join(f"{v:>11}" for v in row))
    return 0


def cmd_area(args) -> int:
    rows = harness.area_table(args.d, args.s)
    if args.csv:
        print("d,s,area_kge,config")
        for d, s, a, tag in rows:
            print(f"{d},{s},{a:.2f},{tag}")
    else:
        print(f"{'d':>4} {'s':>4} {'kGE':>8}")
        for d, s, a, tag in rows:
            print(f"{d:>4} {s:>4} {a:>8.2f}  {tag}")
    return 0


def cmd_selftest(args) -> int:
    results = run_all()
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail}")
    failed = [r for r in results if not r.ok]
    if failed:
        print(f"selftest failed: {failed[0].name} ({failed[0].detail})", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmacsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", metavar="PATH", help="scenario file (INI)")
        sp.add_argument("--out", metavar="DIR", help="directory for output files")
        sp.add_argument("--seed", type=int, default=None, help="workload seed")
        sp.add_argument("--csv", action="store_true", help="print CSV instead of a table")

    r = sub.add_parser("run", help="run one scenario")
    common(r)
    r.add_argument("--preset", default="base", choices=sorted(harness.PRESETS))
    r.add_argument("--latency", type=int, default=1)
    r.add_argument("--size", type=int, default=64)
    r.add_argument("--hit-rate", type=float, default=1.0)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="utilization over sizes and latencies")
    common(s)
    s.add_argument("--configs", type=_names, default=list(harness.PRESETS))
    s.add_argument("--sizes", type=_ints, default=list(harness.DEFAULT_SIZES))
    s.add_argument("--latencies", type=_ints, default=[1, 13, 100])
    s.add_argument("--transfers", type=int, default=None)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--plots", action="store_true", help="write one SVG per latency")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("miss-sweep", help="utilization over speculation hit rates")
    common(m)
    m.add_argument("--preset", default="speculation", choices=sorted(harness.PRESETS))
    m.add_argument("--hit-rates", type=_floats, default=[1.0, 0.75, 0.5, 0.25, 0.0])
    m.add_argument("--sizes", type=_ints, default=[64, 128, 256])
    m.add_argument("--latency", type=int, default=13)
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("--plots", action="store_true")
    m.set_defaults(func=cmd_miss_sweep)

    lat = sub.add_parser("latency", help="first-transfer latency probes")
    lat.add_argument("--latencies", type=_ints, default=[1, 13, 100])
    lat.add_argument("--csv", action="store_true")
    lat.set_defaults(func=cmd_latency)

    a = sub.add_parser("area", help="tabulate the area model")
    a.add_argument("--d", type=_ints, default=[4, 8, 16, 24])
    a.add_argument("--s", type=_ints, default=[0, 4, 8, 16, 24])
    a.add_argument("--csv", action="store_true")
    a.set_defaults(func=cmd_area)

    t = sub.add_parser("selftest", help="quick check of the headline results")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SimulationExhausted as exc:
        print(f"simulation stalled at cycle {exc.cycle}; last event {exc.last_event}",
              file=sys.stderr)
    except (harness.ConfigError, harness.IntegrityError, WindowError, OSError,
            RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
