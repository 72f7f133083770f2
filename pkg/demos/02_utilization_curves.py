"""
Bus utilization against transfer size
=====================================

Sweep every controller configuration over transfer sizes in the three memory
regimes and draw one chart per latency next to the ideal bound n/(n+32).
"""

from pathlib import Path

from dmacsim import harness
from dmacsim.plots import plot_sweep

cells = harness.sweep_cells(None, list(harness.PRESETS), harness.DEFAULT_SIZES, [1, 13, 100])
reports = harness.run_cells(cells, jobs=4)

# %%
# A compact view at 64 B, where descriptor overhead hurts the most
for r in reports:
    if r.size == "64":
        print(f"{r.config:<12} L={r.latency:<4} {r.steady_state_utilization:.3f} "
              f"(ideal {r.ideal_utilization:.3f})")

# %%
out = Path("demo_output")
for path in plot_sweep(reports, out):
    print("wrote", path)
(out / "sweep.csv").write_text(harness.reports_csv(reports))
