"""S, MM and MCD fits on the Old Faithful geyser data.

Short eruptions (under 3 minutes) form a minority cluster. All fits share one
pool of 500 elemental starts, so differences come from the estimators alone.

Run with ``python demos/02_geyser_fits.py``.
"""

from robmon.datasets import geyser_minority_mask, load_geyser
from robmon.estimation import bdp_to_h, generate_elemental_subsets, mcd_estimate, mm_estimate, s_estimate
from robmon.rho import RhoSpec

data = load_geyser("azzalini_bowman")
minority = geyser_minority_mask(data)
pool = generate_elemental_subsets(data.n, data.p, 500, seed=1)
print(f"{data.n} eruptions, minority share {minority.mean():.3f}")


def report(name, fit):
    loc = ", ".join(f"{v:.3f}" for v in fit.location)
    print(f"{name:<22} location=({loc})  minority mean weight={fit.weights[minority].mean():.3f}")


report("S custom a=0.2", s_estimate(data, RhoSpec.custom(2, 0.2), pool))
s50 = s_estimate(data, RhoSpec.bisquare(2, bdp=0.5), pool)
s49 = s_estimate(data, RhoSpec.bisquare(2, bdp=0.49), pool)
report("S bisquare bdp=0.50", s50)
report("S bisquare bdp=0.49", s49)
report("MCD bdp=0.5", mcd_estimate(data, bdp_to_h(data.n, 2, 0.5), pool))

# MM inherits the robustness of whichever S fit it starts from
eff = RhoSpec.bisquare(2, bdp=0.45)
report("MM from S(0.50)", mm_estimate(data, s50, eff))
report("MM from S(0.49)", mm_estimate(data, s49, eff))
