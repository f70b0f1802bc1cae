"""Classical PCA, tolerance ellipses and weight-comparison tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .estimation import DataMatrix, FitResult, as_data_matrix
from .rho import RhoSpec

__all__ = [
    "PcaResult",
    "classical_pca",
    "tolerance_ellipse",
    "ellipse_area",
    "WeightTable",
    "weight_comparison",
]


@dataclass
class PcaResult:
    loadings: np.ndarray
    scores: np.ndarray
    explained_variance_ratio: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray

    @property
    def all_ratios(self):
        """Explained-variance ratios of every component, not only the first k."""
        total = self.eigenvalues.sum()
        return self.eigenvalues / total if total > 0 else np.zeros_like(self.eigenvalues)

    def reconstruct(self):
        return self.scores @ self.loadings.T + self.mean


def classical_pca(data, k, rank_tol=1e-10):
    """PCA from the eigendecomposition of the sample covariance.

    Each loading vector is signed so that its largest-magnitude entry is
    positive.

    Parameters
    ----------
    data : DataMatrix or array_like
        Plain arrays need only two rows; the estimators' ``n >= p + 1``
        requirement does not apply here.
    k : int
        Number of components, ``1 <= k <= rank``.

    Returns
    -------
    PcaResult
    """
    x = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or not np.all(np.isfinite(x)):
        raise ValueError("PCA needs a finite 2-d array with at least two rows")
    n, p = x.shape
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}], got {k}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    evals, evecs = linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    rank = int(np.sum(evals > rank_tol * max(evals[0], np.finfo(float).tiny)))
    if k > rank:
        raise ValueError(f"k={k} exceeds the rank {rank} of the data")
    for j in range(p):
        col = evecs[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            evecs[:, j] = -col
    loadings = evecs[:, :k]
    total = evals.sum()
    return PcaResult(
        loadings=loadings,
        scores=xc @ loadings,
        explained_variance_ratio=evals[:k] / total,
        eigenvalues=evals,
        mean=mean,
    )


def _location_scatter(fit):
    if isinstance(fit, FitResult):
        return np.asarray(fit.location, float), np.asarray(fit.scatter, float)
    loc, scatter = fit
    return np.asarray(loc, float), np.atleast_2d(np.asarray(scatter, float))


def tolerance_ellipse(fit, level=0.975, n_points=200):
    """Boundary of ``{y : (y - T)' C^{-1} (y - T) = chi2_2(level)}``.

    Parameters
    ----------
    fit : FitResult or (location, scatter)
        Must be bivariate.
    level : float in (0, 1)
    n_points : int
        Points at equally spaced parameter angles ``2 pi j / n_points``.

    Returns
    -------
    ndarray of shape (n_points, 2)
    """
    loc, scatter = _location_scatter(fit)
    if loc.shape != (2,) or scatter.shape != (2, 2):
        raise ValueError("tolerance ellipses are only supported for p = 2")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if n_points < 3:
        raise ValueError("need at least 3 points")
    radius = np.sqrt(stats.chi2.ppf(level, 2))
    chol = np.linalg.cholesky(scatter)
    theta = 2.0 * np.pi * np.arange(n_points) / n_points
    circle = np.vstack([np.cos(theta), np.sin(theta)])
    return loc + radius * (chol @ circle).T


def ellipse_area(scatter, level=0.975):
    """pi * sqrt(det C) * chi2_2(level)."""
    return float(np.pi * np.sqrt(np.linalg.det(scatter)) * stats.chi2.ppf(level, 2))


@dataclass
class WeightTable:
    """Per-observation weights; column order is preserved on export."""

    columns: dict

    def __getitem__(self, key):
        return self.columns[key]

    @property
    def labels(self):
        return list(self.columns)

    def to_csv(self, fh=None):
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        names = list(self.columns)
        w.writerow(names)
        cols = [self.columns[k] for k in names]
        for i in range(len(cols[0])):
            row = []
            for c in cols:
                v = c[i]
                row.append(str(int(v)) if np.issubdtype(np.asarray(c).dtype, np.integer) else repr(float(v)))
            w.writerow(row)
        return out.getvalue() if fh is None else None


def weight_comparison(data, mcd_fit, specs, labels=None):
    """Weights of each rho-function at the MCD statistical distances.

    Parameters
    ----------
    data : DataMatrix or array_like
    mcd_fit : FitResult or list of FitResult
        The (first) fit with ``method="MCD"`` supplies the distances and
        the hard weights.
    specs : list of RhoSpec
    labels : list of str, optional
        Column names; defaults to each spec's label.

    Returns
    -------
    WeightTable
        Columns ``obs_index``, ``mcd_distance``, ``mcd_weight`` and one
        column per spec.
    """
    data = as_data_matrix(data)
    fits = mcd_fit if isinstance(mcd_fit, (list, tuple)) else [mcd_fit]
    mcd = next((f for f in fits if f.method == "MCD"), None)
    if mcd is None:
        raise ValueError("weight_comparison needs an MCD fit")
    if mcd.p != data.p or mcd.distances.shape[0] != data.n:
        raise ValueError("MCD fit does not match the data")
    labels = list(labels) if labels is not None else [s.label for s in specs]
    if len(labels) != len(specs) or len(set(labels)) != len(labels):
        raise ValueError("need one distinct label per spec")
    cols = {
        "obs_index": np.arange(data.n),
        "mcd_distance": np.asarray(mcd.distances, float),
        "mcd_weight": np.asarray(mcd.weights, float),
    }
    for label, spec in zip(labels, specs):
        if not isinstance(spec, RhoSpec) or spec.p != data.p:
            raise ValueError(f"spec {label!r} does not match the data dimension")
        cols[label] = spec.weight(mcd.distances)
    return WeightTable(cols)
