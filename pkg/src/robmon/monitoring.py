"""Monitoring: refit an estimator over a grid of tuning values.

Every fit in a sweep draws its starts from the same :class:`SubsetPool`, so
changes in the distance trajectories come from the tuning parameter alone.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .estimation import (
    EstimationError,
    SubsetPool,
    as_data_matrix,
    bdp_to_h,
    mcd_estimate,
    mm_estimate,
    s_estimate,
)
from .rho import RhoSpec

__all__ = [
    "MonitoringTrace",
    "monitor",
    "detect_transition",
    "distance_changes",
    "shift_experiment",
    "ShiftReport",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 0.25
SCHEMA_VERSION = 1

_ESTIMATORS = ("S", "MM", "MCD")


@dataclass
class MonitoringTrace:
    """Distances and fit summaries for every grid value of one sweep.

    ``distances[k]`` is None when the fit at ``grid[k]`` failed; the matching
    summary then has ``converged=False`` and an ``error`` entry.
    """

    estimator: str
    rho_family: str | None
    grid: list
    distances: list
    summaries: list
    pool_seed: int | None
    pool_digest: str
    s_start: dict | None = None
    weights: list = field(default_factory=list)

    @property
    def n_obs(self):
        for d in self.distances:
            if d is not None:
                return d.shape[0]
        return 0

    def max_distances(self):
        return [None if d is None else float(np.max(d)) for d in self.distances]

    def sorted_by_grid(self):
        """Copy with grid values in increasing order."""
        order = sorted(range(len(self.grid)), key=lambda k: self.grid[k])
        pick = lambda seq: [seq[k] for k in order] if seq else seq  # noqa: E731
        return MonitoringTrace(
            estimator=self.estimator,
            rho_family=self.rho_family,
            grid=pick(self.grid),
            distances=pick(self.distances),
            summaries=pick(self.summaries),
            pool_seed=self.pool_seed,
            pool_digest=self.pool_digest,
            s_start=self.s_start,
            weights=pick(self.weights),
        )

    def to_csv(self, fh=None):
        """Long format: grid_value, obs_index, distance."""
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["grid_value", "obs_index", "distance"])
        for g, dist in zip(self.grid, self.distances):
            if dist is None:
                continue
            for i, v in enumerate(dist):
                w.writerow([repr(float(g)), i, repr(float(v))])
        if fh is None:
            return out.getvalue()
        return None

    def summary_dict(self, threshold=DEFAULT_THRESHOLD):
        k = detect_transition(self, threshold) if len(self.grid) >= 2 else None
        return {
            "schema_version": SCHEMA_VERSION,
            "estimator": self.estimator,
            "rho_family": self.rho_family,
            "grid": [float(g) for g in self.grid],
            "pool_seed": self.pool_seed,
            "pool_digest": self.pool_digest,
            "s_start": self.s_start,
            "summaries": self.summaries,
            "max_distances": self.max_distances(),
            "distance_changes": distance_changes(self),
            "transition_threshold": threshold,
            "transition_index": k,
            "transition_grid_values": None if k is None else [float(self.grid[k - 1]), float(self.grid[k])],
        }

    def to_json(self, threshold=DEFAULT_THRESHOLD):
        return json.dumps(self.summary_dict(threshold), indent=2, sort_keys=True)


def _check_grid(grid):
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must not be empty")
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("grid must be strictly monotone")
    return grid


def _summary(fit, pool_digest):
    return {
        "location": [float(v) for v in fit.location],
        "log_det": fit.log_det,
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "pool_digest": pool_digest,
    }


def monitor(
    data,
    estimator,
    grid,
    pool,
    rho="bisquare",
    s_bdp=0.5,
    fit_options=None,
):
    """Fit ``estimator`` at every grid value with the same starting pool.

    Parameters
    ----------
    data : DataMatrix or array_like
    estimator : {"S", "MM", "MCD"}
    grid : sequence of float
        Strictly monotone. Breakdown values for bisquare S, MM (tuning of the
        efficient rho) and MCD (``h = ceil(n (1 - bdp))``); flatness ``a``
        for S with ``rho="custom"``.
    pool : SubsetPool or list of (location, scatter)
        Shared by every fit.
    rho : {"bisquare", "custom"}
        rho family for S sweeps.
    s_bdp : float
        Breakdown value of the bisquare S fit that starts every MM fit. It is
        computed once and reused across the sweep.
    fit_options : dict, optional
        Passed to the underlying estimator.

    Returns
    -------
    MonitoringTrace
    """
    data = as_data_matrix(data)
    estimator = str(estimator).upper()
    if estimator not in _ESTIMATORS:
        raise ValueError(f"estimator must be one of {_ESTIMATORS}")
    if rho not in ("bisquare", "custom"):
        raise ValueError("rho must be 'bisquare' or 'custom'")
    if estimator != "S" and rho == "custom":
        raise ValueError("custom rho sweeps are only available for S")
    grid = _check_grid(grid)
    opts = dict(fit_options or {})
    n, p = data.shape
    if isinstance(pool, SubsetPool):
        pool_seed, digest = pool.seed, pool.digest()
    else:
        pool_seed, digest = None, _starts_digest(pool)

    s_fit = None
    s_start = None
    if estimator == "MM":
        s_spec = RhoSpec.bisquare(p, bdp=s_bdp)
        s_fit = s_estimate(data, s_spec, pool, **opts)
        s_start = {"bdp": s_bdp, "log_det": s_fit.log_det, "location": [float(v) for v in s_fit.location]}

    distances, summaries, weights = [], [], []
    for g in grid:
        try:
            if estimator == "S":
                spec = RhoSpec.bisquare(p, bdp=g) if rho == "bisquare" else RhoSpec.custom(p, g)
                fit = s_estimate(data, spec, pool, **opts)
            elif estimator == "MM":
                fit = mm_estimate(data, s_fit, RhoSpec.bisquare(p, bdp=g))
            else:
                mcd_opts = {k: v for k, v in opts.items() if k in ("max_csteps", "n_best_kept", "reweight", "cutoff_quantile")}
                fit = mcd_estimate(data, bdp_to_h(n, p, g), pool, **mcd_opts)
        except (EstimationError, np.linalg.LinAlgError, ArithmeticError) as exc:
            distances.append(None)
            weights.append(None)
            summaries.append({"converged": False, "error": str(exc), "pool_digest": digest})
            continue
        distances.append(fit.distances)
        weights.append(fit.weights)
        summaries.append(_summary(fit, digest))
    return MonitoringTrace(
        estimator=estimator,
        rho_family=rho if estimator != "MCD" else None,
        grid=grid,
        distances=distances,
        summaries=summaries,
        pool_seed=pool_seed,
        pool_digest=digest,
        s_start=s_start,
        weights=weights,
    )


def _starts_digest(starts):
    import hashlib

    h = hashlib.sha256()
    for t, c in starts:
        h.update(np.ascontiguousarray(t, dtype=float).tobytes())
        h.update(np.ascontiguousarray(c, dtype=float).tobytes())
    return h.hexdigest()


def distance_changes(trace):
    """Relative change ``||d_k - d_prev|| / ||d_prev||`` between consecutive
    usable grid points; None where a fit failed or has no predecessor."""
    dists = trace.distances if isinstance(trace, MonitoringTrace) else list(trace)
    out, prev = [], None
    for d in dists:
        if d is None:
            out.append(None)
            continue
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if prev is None or prev.shape != d.shape:
            out.append(None)
        else:
            norm = np.linalg.norm(prev)
            out.append(float(np.linalg.norm(d - prev) / norm) if norm > 0 else None)
        prev = d
    return out


def detect_transition(trace, threshold=DEFAULT_THRESHOLD):
    """Index of the first grid point whose distance vector differs from the
    previous usable one by more than ``threshold`` in relative norm.

    Parameters
    ----------
    trace : MonitoringTrace or sequence of distance arrays
        Scalars (for instance per-point maxima) are treated as
        length-one vectors.
    threshold : float

    Returns
    -------
    int or None
        None means the trajectories are flat: no switch between a robust
        and a non-robust fit along the grid.
    """
    dists = trace.distances if isinstance(trace, MonitoringTrace) else list(trace)
    if len(dists) < 2:
        raise ValueError("need at least two grid points")
    for k, change in enumerate(distance_changes(dists)):
        if change is not None and change > threshold:
            return k
    return None


@dataclass
class ShiftReport:
    """Outcome of a shift experiment, one record per shift."""

    deltas: list
    transitions: list
    detected: list
    minority_weight: list
    traces: list = field(repr=False, default_factory=list)

    @property
    def largest_detected_delta(self):
        hits = [d for d, ok in zip(self.deltas, self.detected) if ok]
        return max(hits) if hits else None

    def to_dict(self):
        return {
            "deltas": [float(d) for d in self.deltas],
            "transition_index": self.transitions,
            "detected": self.detected,
            "minority_mean_weight": self.minority_weight,
            "largest_detected_delta": self.largest_detected_delta,
        }


def shift_experiment(base_data, minority_mask, direction, delta_grid, estimator_config):
    """Move the minority cluster by ``delta * direction`` and monitor again.

    Parameters
    ----------
    base_data : DataMatrix or array_like
    minority_mask : bool array
        Rows that are translated; must be a nonempty proper subset.
    direction : array_like
        Translation vector (not normalised, so ``delta = 1`` moves by the
        full vector).
    delta_grid : sequence of float
    estimator_config : dict
        Keyword arguments for :func:`monitor` (``estimator``, ``grid``,
        ``pool``, ``rho``, ...) plus optional ``threshold``.

    Returns
    -------
    ShiftReport
        ``minority_weight`` is the mean weight of the minority rows in the
        fit at the first grid value.
    """
    data = as_data_matrix(base_data)
    mask = np.asarray(minority_mask, dtype=bool)
    if mask.shape != (data.n,) or not mask.any() or mask.all():
        raise ValueError("minority_mask must be a nonempty proper subset of the rows")
    direction = np.asarray(direction, dtype=float).reshape(-1)
    if direction.shape != (data.p,) or not np.any(direction != 0):
        raise ValueError("direction must be a nonzero vector of length p")
    cfg = dict(estimator_config)
    threshold = cfg.pop("threshold", DEFAULT_THRESHOLD)

    report = ShiftReport([], [], [], [])
    for delta in delta_grid:
        values = data.values.copy()
        values[mask] += float(delta) * direction
        shifted = type(data)(values, data.column_names)
        trace = monitor(shifted, **cfg)
        k = detect_transition(trace, threshold) if len(trace.grid) >= 2 else None
        w0 = trace.weights[0]
        report.deltas.append(float(delta))
        report.transitions.append(k)
        report.detected.append(k is not None)
        report.minority_weight.append(None if w0 is None else float(np.mean(w0[mask])))
        report.traces.append(trace)
    return report
