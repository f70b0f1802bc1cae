"""Monitoring distances along a breakdown grid.

The same start pool is reused at every grid value. A transition is flagged
where the vector of distances changes by more than 25% between neighbours.

Run with ``python demos/03_monitoring.py``.
"""

from robmon.datasets import load_geyser
from robmon.estimation import generate_elemental_subsets
from robmon.monitoring import detect_transition, distance_changes, monitor

data = load_geyser("azzalini_bowman")
pool = generate_elemental_subsets(data.n, data.p, 500, seed=1)

for estimator, grid in [("S", [0.5, 0.49, 0.45, 0.4]), ("MCD", [0.5, 0.45, 0.4, 0.35, 0.3, 0.25])]:
    trace = monitor(data, estimator, grid, pool)
    print(f"\n{estimator} bisquare sweep" if estimator == "S" else f"\n{estimator} sweep")
    for g, change in zip(trace.grid, distance_changes(trace)):
        shown = "" if change is None else f"{change:.3f}"
        print(f"  bdp={g:.2f}  relative change={shown}")
    k = detect_transition(trace)
    print("  no transition" if k is None else f"  transition between {trace.grid[k - 1]} and {trace.grid[k]}")

trace = monitor(data, "S", [0.2, 0.5, 1.0], pool, rho="custom")
print(f"\ncustom rho over a: transition index {detect_transition(trace)}")
