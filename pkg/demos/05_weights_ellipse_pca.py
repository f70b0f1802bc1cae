"""Weights, tolerance ellipses and classical PCA.

Weights from several rho functions are evaluated at the MCD distances, the
97.5% tolerance ellipse of the MCD fit is traced, and classical PCA is shown
on skewed data for contrast.

Run with ``python demos/05_weights_ellipse_pca.py``.
"""

import numpy as np

from robmon.analysis import classical_pca, ellipse_area, tolerance_ellipse, weight_comparison
from robmon.datasets import generate_skewed, load_geyser
from robmon.estimation import bdp_to_h, generate_elemental_subsets, mcd_estimate
from robmon.rho import RhoSpec

data = load_geyser()
pool = generate_elemental_subsets(data.n, data.p, 500, seed=1)
mcd = mcd_estimate(data, bdp_to_h(data.n, 2, 0.5), pool)

table = weight_comparison(data, mcd, [RhoSpec.bisquare(2, bdp=0.5), RhoSpec.custom(2, 0.2)])
between = (data.values[:, 0] > 2.4) & (data.values[:, 0] < 3.6)
print(f"{between.sum()} eruptions between the clusters, mean weights:")
for label in table.labels[2:]:
    print(f"  {label:<16} {table[label][between].mean():.3f}")

pts = tolerance_ellipse(mcd, level=0.975, n_points=8)
print("\nMCD 97.5% ellipse, 8 points:")
print(np.array2string(pts, precision=3))
print(f"area {ellipse_area(mcd.scatter, 0.975):.3f}")

skewed = generate_skewed(500, 3, [1, 1, 0], seed=0)
pca = classical_pca(skewed, 2)
print(f"\nclassical PCA on skewed data, explained ratios {np.round(pca.explained_variance_ratio, 4)}")
print(f"first loading {np.round(pca.loadings[:, 0], 4)}")
