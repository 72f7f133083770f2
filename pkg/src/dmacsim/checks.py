"""Quick self-checks behind ``dmacsim selftest``.

Each check returns a :class:`CheckResult`.  They cover the headline figures
on short workloads so the whole set runs in a few seconds; the test suite
runs the full-size versions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .harness import latency_table, run_scenario, scenario
from .metrics import MeasurementWindow, estimate_area, ideal_utilization

_QUICK = MeasurementWindow(warmup_transfers=8, measured_transfers=64)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _util(preset: str, L: int, n: int, **kw) -> float:
    cfg = scenario(preset, L, n, transfer_count=80, **kw)
    return run_scenario(replace(cfg, window=_QUICK)).report.steady_state_utilization


def check_ideal_memory() -> CheckResult:
    worst = max(abs(_util("base", 1, n) - ideal_utilization(n)) for n in (8, 64, 512))
    return CheckResult("ideal-memory utilization", worst <= 0.01, f"max deviation {worst:.4f}")


def check_latency_table() -> CheckResult:
    row = latency_table()["scaled"]
    return CheckResult("latency probes", row == (3, 8, 32, 206, 1), f"main row {row}")


def check_prefetch() -> CheckResult:
    spec = _util("speculation", 13, 64) / ideal_utilization(64)
    base = _util("base", 13, 64) / ideal_utilization(64)
    return CheckResult("prefetching at L=13", spec >= 0.99 and base < 0.95,
                       f"speculation {spec:.3f}, base {base:.3f} of ideal")


def check_scaled() -> CheckResult:
    r = _util("scaled", 100, 128) / ideal_utilization(128)
    return CheckResult("scaled at L=100", r >= 0.99, f"{r:.3f} of ideal at 128 B")


def check_baseline_ratio() -> CheckResult:
    ratio = _util("base", 1, 64) / _util("baseline", 1, 64)
    return CheckResult("baseline ratio", 2.0 <= ratio <= 3.0, f"main/baseline {ratio:.2f}")


def check_area() -> CheckResult:
    got = (estimate_area(4, 0), estimate_area(4, 4), estimate_area(24, 24))
    return CheckResult("area model", got == (41.42, 49.18, 193.58), f"{got}")


def check_determinism() -> CheckResult:
    cfg = replace(scenario("speculation", 13, 64, hit_rate=0.5, transfer_count=80), window=_QUICK)
    a = run_scenario(cfg, record_trace=True).testbench.sim.trace
    b = run_scenario(cfg, record_trace=True).testbench.sim.trace
    return CheckResult("determinism", a == b, f"{len(a)} trace events")


CHECKS: list[Callable[[], CheckResult]] = [
    check_ideal_memory, check_latency_table, check_prefetch, check_scaled,
    check_baseline_ratio, check_area, check_determinism,
]


def run_all() -> list[CheckResult]:
    results = []
    for fn in CHECKS:
        try:
            results.append(fn())
        except Exception as exc:  # a crash is a failed check, not a crashed selftest
            results.append(CheckResult(fn.__name__.removeprefix("check_"), False, repr(exc)))
    return results

