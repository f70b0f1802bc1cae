"""Custom and bisquare rho functions side by side.

The custom rho is quadratic up to sqrt(p), bends over a band of relative
width ``a`` and is flat afterwards. The bisquare with the same breakdown
point redescends much later, which is why it keeps weight on far points.

Run with ``python demos/01_rho_functions.py``.
"""

import numpy as np

from robmon.rho import RhoSpec, breakdown_value, consistency_constant

p = 2
custom = RhoSpec.custom(p, 0.2)
bisquare = RhoSpec.bisquare(p, bdp=0.5)

print(f"custom a=0.2: K={custom.k_const:.6f}, rejects beyond d={custom.endpoint:.4f}")
print(f"bisquare bdp=0.5: c={bisquare.param:.4f}, K={bisquare.k_const:.6f}")

d = np.linspace(0, 3, 13)
print("\n    d   w_custom  w_bisquare")
for di, wc, wb in zip(d, custom.weight(d), bisquare.weight(d)):
    print(f"{di:5.2f}  {wc:9.4f}  {wb:10.4f}")

# the flat tail caps the constraint, so breakdown falls as p grows
print("\nbreakdown of the custom rho with a=0.2")
for dim in (1, 2, 5, 10):
    spec = RhoSpec.custom(dim, 0.2)
    print(f"  p={dim:2d}: {breakdown_value(spec):.4f}")

# K for a standard normal, by quadrature over the chi distribution
print(f"\nK by quadrature for p=5, a=1: {consistency_constant('custom', 5, 1.0):.10f}")
