"""
What mispredictions cost
========================

Scatter descriptors so that a chosen fraction of next pointers defeats the
``previous + 32`` prediction, and watch utilization and wasted beats.
"""

from dmacsim import harness

cells = harness.miss_sweep_cells(None, [1.0, 0.75, 0.5, 0.25, 0.0], [64, 256], latency=13)
reports = harness.run_cells(cells)
base = harness.run_scenario(harness.scenario("base", 13, 64)).report

print("hit rate  size  utilization  wasted beats/transfer")
for r in reports:
    print(f"{r.hit_rate:8.2f}  {r.size:>4}  {r.steady_state_utilization:11.3f}  "
          f"{r.wasted_beats / r.transfers:8.2f}")

# %%
# With every prediction wrong the speculative controller falls back to the
# non-speculative one: the correct read still leaves in the same cycle the
# next pointer arrives, and the discarded reads only cost idle bus slots.
print(f"no speculation at 64 B: {base.steady_state_utilization:.3f}")
