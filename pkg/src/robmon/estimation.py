"""Multivariate S-, MM- and MCD estimators of location and scatter.

The S-estimator minimises ``det(C)`` subject to ``mean(rho(d_i(T, C))) = K``.
It is computed FAST-S style: every start is run for a couple of reweighting
(IRLS) steps, the best few are iterated to convergence. The scale is solved
exactly after every update so the constraint holds at each iterate.

The MCD looks for the ``h``-subset whose covariance matrix has the smallest
determinant and is computed with concentration steps (C-steps).

Starts come either from a :class:`SubsetPool` of index sets, which is a pure
function of ``(seed, n, p, count)`` and can be shared across a whole
monitoring sweep, or from :func:`deterministic_starts`.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .rho import RhoSpec

__all__ = [
    "DataMatrix",
    "FitResult",
    "SubsetPool",
    "EstimationError",
    "DegenerateDataError",
    "as_data_matrix",
    "statistical_distances",
    "generate_elemental_subsets",
    "exhaustive_subsets",
    "deterministic_starts",
    "s_estimate",
    "mm_estimate",
    "mcd_estimate",
    "cstep",
    "mcd_consistency_factor",
    "bdp_to_h",
]

# relative eigenvalue floor below which a scatter matrix counts as singular
_SINGULAR_RTOL = 1e-12


class EstimationError(RuntimeError):
    """No usable start survived; ``diagnostics`` lists what went wrong."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class DegenerateDataError(ValueError):
    """The data (or a subset) does not span p dimensions."""


@dataclass(frozen=True)
class DataMatrix:
    """n x p observations with column labels."""

    values: np.ndarray
    column_names: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("data must be a 2-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains missing or non-finite values")
        n, p = values.shape
        if n < p + 1:
            raise ValueError(f"need n >= p + 1 observations, got n={n}, p={p}")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise ValueError("column_names must have one label per column")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


def as_data_matrix(data):
    if isinstance(data, DataMatrix):
        return data
    return DataMatrix(np.asarray(data, dtype=float))


@dataclass
class FitResult:
    """Location/scatter estimate with per-observation distances and weights.

    For MCD fits ``weights`` are the hard 0/1 weights of the final (possibly
    reweighted) solution; the raw h-subset solution is kept in the ``raw_*``
    attributes.
    """

    location: np.ndarray
    scatter: np.ndarray
    distances: np.ndarray
    weights: np.ndarray
    objective: float
    converged: bool
    iterations: int
    method: str
    spec: RhoSpec | None = None
    diagnostics: dict = field(default_factory=dict)
    raw_location: np.ndarray | None = None
    raw_scatter: np.ndarray | None = None
    raw_distances: np.ndarray | None = None
    raw_weights: np.ndarray | None = None

    @property
    def p(self):
        return self.location.shape[0]

    @property
    def log_det(self):
        return float(np.linalg.slogdet(self.scatter)[1])

    def constraint_residual(self):
        """mean(rho(d_i)) - K; only meaningful for S fits."""
        if self.spec is None:
            raise ValueError("fit carries no rho spec")
        return float(np.mean(self.spec.rho(self.distances)) - self.spec.k_const)


@dataclass(frozen=True)
class SubsetPool:
    """Fixed collection of starting index sets.

    ``subsets`` is a ``(count, size)`` integer array. Elemental pools have
    ``size = p + 1``; pools whose size equals ``h`` are used directly as
    initial h-subsets by the MCD.
    """

    seed: int | None
    n: int
    p: int
    subsets: np.ndarray

    def __post_init__(self):
        subsets = np.array(self.subsets, dtype=np.int64)
        if subsets.ndim != 2 or subsets.shape[0] < 1:
            raise ValueError("subsets must be a non-empty 2-d index array")
        if subsets.min() < 0 or subsets.max() >= self.n:
            raise ValueError("subset indices out of range")
        if subsets.shape[1] < self.p + 1:
            raise ValueError("subsets need at least p + 1 indices")
        subsets.setflags(write=False)
        object.__setattr__(self, "subsets", subsets)

    def __len__(self):
        return self.subsets.shape[0]

    def digest(self):
        """SHA-256 of the pool content, used to check pool fixity."""
        h = hashlib.sha256()
        h.update(np.array([self.n, self.p], dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.subsets).tobytes())
        return h.hexdigest()


def generate_elemental_subsets(n, p, count, seed):
    """``count`` random (p+1)-subsets of ``range(n)``, reproducible from ``seed``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if n < p + 1:
        raise ValueError(f"n={n} is too small for elemental subsets of size {p + 1}")
    rng = np.random.default_rng(seed)
    subsets = np.empty((count, p + 1), dtype=np.int64)
    for i in range(count):
        subsets[i] = rng.choice(n, size=p + 1, replace=False)
    return SubsetPool(seed=seed, n=n, p=p, subsets=subsets)


def exhaustive_subsets(n, p, size):
    """Every ``size``-subset of ``range(n)`` in lexicographic order."""
    subsets = np.array(list(itertools.combinations(range(n), size)), dtype=np.int64)
    return SubsetPool(seed=None, n=n, p=p, subsets=subsets)


# -- linear algebra helpers --------------------------------------------------


def statistical_distances(data, location, scatter):
    """d_i = sqrt((y_i - T)' C^{-1} (y_i - T)) via a Cholesky factor of C.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``scatter`` is not positive definite.
    """
    y = data.values if isinstance(data, DataMatrix) else np.atleast_2d(np.asarray(data, float))
    location = np.asarray(location, dtype=float)
    scatter = np.atleast_2d(np.asarray(scatter, dtype=float))
    if not np.allclose(scatter, scatter.T, rtol=1e-10, atol=0):
        raise np.linalg.LinAlgError("scatter matrix is not symmetric")
    chol = np.linalg.cholesky(scatter)
    z = linalg.solve_triangular(chol, (y - location).T, lower=True)
    return np.sqrt(np.einsum("ij,ij->j", z, z))


def _batched_distances(y, locs, shapes):
    # locs (m, p), shapes (m, p, p) -> (m, n)
    chol = np.linalg.cholesky(shapes)
    resid = (y[None, :, :] - locs[:, None, :]).transpose(0, 2, 1)
    z = np.linalg.solve(chol, resid)
    return np.sqrt(np.einsum("mpn,mpn->mn", z, z))


def _well_conditioned(mats):
    ev = np.linalg.eigvalsh(mats)
    top = ev[..., -1]
    return np.isfinite(ev).all(axis=-1) & (top > 0) & (ev[..., 0] > _SINGULAR_RTOL * top)


def _normalize_shape(mats):
    """Scale each matrix to unit determinant; returns (shapes, logdets)."""
    sign, logdet = np.linalg.slogdet(mats)
    p = mats.shape[-1]
    return mats * np.exp(-logdet / p)[..., None, None], logdet


def _ml_cov(x):
    return np.cov(x, rowvar=False, bias=True).reshape(x.shape[1], x.shape[1])


# -- scale solver -------------------------------------------------------------


def _solve_scale(dt, spec, max_iter=200):
    """Vectorised root of mean(rho(dt_j / s)) = K in log s, one per row of ``dt``.

    Safeguarded Newton inside a bracket that is widened by doubling.
    Returns ``(log_s, ok)``; rows without a root get ``ok = False``.
    """
    dt = np.atleast_2d(dt)
    m, n = dt.shape
    k = spec.k_const
    frac_pos = (dt > 0).mean(axis=1)
    ok = frac_pos * spec.rho_max > k * (1 + 1e-12)
    pos_min = np.where(dt > 0, dt, np.inf).min(axis=1)
    pos_min = np.where(np.isfinite(pos_min), pos_min, 1.0)

    def f_and_slope(ls):
        d = dt * np.exp(-ls)[:, None]
        f = spec.rho(d).mean(axis=1) - k
        slope = -(spec.psi(d) * d).mean(axis=1)
        return f, slope

    # f(lo) > 0: every positive distance lies past the redescent endpoint
    lo = np.log(pos_min / spec.endpoint) - 1.0
    # rho(d) <= d^2/2 for both families, so f(hi) < 0
    hi = 0.5 * np.log(np.maximum((dt * dt).mean(axis=1), 1e-300) / (2.0 * k)) + 1.0
    f_lo, _ = f_and_slope(lo)
    f_hi, _ = f_and_slope(hi)
    for _ in range(60):
        bad = ok & (f_lo <= 0)
        if not bad.any():
            break
        lo = np.where(bad, lo - 2.0, lo)
        f_lo, _ = f_and_slope(lo)
    for _ in range(60):
        bad = ok & (f_hi >= 0)
        if not bad.any():
            break
        hi = np.where(bad, hi + 2.0, hi)
        f_hi, _ = f_and_slope(hi)
    ok &= (f_lo > 0) & (f_hi < 0)

    x = 0.5 * (lo + hi)
    act = np.flatnonzero(ok)
    # Newton from the bracket midpoint, falling back to bisection
    for _ in range(max_iter):
        if act.size == 0:
            break
        xa, la, ha = x[act], lo[act], hi[act]
        d = dt[act] * np.exp(-xa)[:, None]
        f = spec.rho(d).mean(axis=1) - k
        slope = -(spec.psi(d) * d).mean(axis=1)
        la = np.where(f > 0, xa, la)
        ha = np.where(f < 0, xa, ha)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xa - f / slope
        inside = np.isfinite(newton) & (newton > la) & (newton < ha)
        step = np.where(inside, newton, 0.5 * (la + ha))
        lo[act], hi[act] = la, ha
        keep = (np.abs(f) > 1e-14 * k) & (ha - la > 1e-15 * np.maximum(1.0, np.abs(xa)))
        x[act] = np.where(keep, step, xa)
        act = act[keep]
    return x, ok


# -- S-estimator -------------------------------------------------------------


def _starts_from(y, starts):
    """Normalise a pool or (T, C) list to arrays (locs, covs) of candidates."""
    n, p = y.shape
    if isinstance(starts, SubsetPool):
        if starts.n != n or starts.p != p:
            raise ValueError("subset pool does not match the data dimensions")
        sub = y[starts.subsets]  # (m, size, p)
        locs = sub.mean(axis=1)
        resid = sub - locs[:, None, :]
        covs = np.einsum("msi,msj->mij", resid, resid) / (sub.shape[1] - 1)
        return locs, covs
    locs = np.array([np.asarray(t, float) for t, _ in starts]).reshape(-1, p)
    covs = np.array([np.asarray(c, float) for _, c in starts]).reshape(-1, p, p)
    return locs, covs


def _irls_s(y, spec, locs, shapes, log_s, n_steps, tol=None):
    """Run S reweighting steps on a batch of candidates.

    Returns updated (locs, shapes, log_s, ok, iterations, converged).
    """
    m, p = locs.shape
    ok = np.ones(m, dtype=bool)
    converged = np.zeros(m, dtype=bool)
    iters = np.zeros(m, dtype=int)
    logdet = 2 * p * log_s
    for _ in range(n_steps):
        run = ok & ~converged
        if not run.any():
            break
        idx = np.flatnonzero(run)
        d = _batched_distances(y, locs[idx], shapes[idx]) * np.exp(-log_s[idx])[:, None]
        w = spec.weight(d)
        wsum = w.sum(axis=1)
        enough = (w > 0).sum(axis=1) >= p + 1
        new_locs = (w @ y) / np.where(wsum > 0, wsum, 1.0)[:, None]
        resid = y[None, :, :] - new_locs[:, None, :]
        v = np.einsum("mn,mni,mnj->mij", w, resid, resid)
        good = enough & _well_conditioned(v)
        new_shapes = np.empty_like(v)
        if good.any():
            new_shapes[good], _ = _normalize_shape(v[good])
        new_log_s = np.full(idx.shape, np.nan)
        if good.any():
            g = np.flatnonzero(good)
            dt = _batched_distances(y, new_locs[g], new_shapes[g])
            ls, root_ok = _solve_scale(dt, spec)
            new_log_s[g] = np.where(root_ok, ls, np.nan)
        good &= np.isfinite(new_log_s)
        ok[idx[~good]] = False
        g_idx = idx[good]
        new_logdet = 2 * p * new_log_s[good]
        locs[g_idx] = new_locs[good]
        shapes[g_idx] = new_shapes[good]
        log_s[g_idx] = new_log_s[good]
        iters[g_idx] += 1
        if tol is not None:
            converged[g_idx] = np.abs(new_logdet - logdet[g_idx]) < tol
        logdet[g_idx] = new_logdet
    return locs, shapes, log_s, ok, iters, converged


def s_estimate(
    data,
    spec,
    starts,
    max_csteps=2,
    n_best_kept=10,
    refine_tol=1e-12,
    max_refine_iter=2000,
):
    """Multivariate S-estimate of location and scatter.

    Parameters
    ----------
    data : DataMatrix or array_like
    spec : RhoSpec
        rho-function and constraint constant K.
    starts : SubsetPool or list of (location, scatter)
    max_csteps : int
        Reweighting steps applied to every start before screening.
    n_best_kept : int
        Number of candidates (smallest det) refined to convergence.
    refine_tol : float
        Convergence threshold on the change of log det(C).
    max_refine_iter : int

    Returns
    -------
    FitResult
        ``method="S"``; ``objective`` is det(C).

    Raises
    ------
    EstimationError
        If every start degenerates.
    """
    data = as_data_matrix(data)
    y = data.values
    n, p = y.shape
    if spec.p != p:
        raise ValueError(f"rho spec is for p={spec.p}, data has p={p}")
    locs, covs = _starts_from(y, starts)
    m = locs.shape[0]
    diagnostics = []

    usable = _well_conditioned(covs)
    for i in np.flatnonzero(~usable):
        diagnostics.append({"start": int(i), "reason": "singular starting scatter"})
    idx = np.flatnonzero(usable)
    shapes = np.empty_like(covs)
    log_s = np.full(m, np.nan)
    if idx.size:
        shapes[idx], _ = _normalize_shape(covs[idx])
        ls, root_ok = _solve_scale(_batched_distances(y, locs[idx], shapes[idx]), spec)
        for i in idx[~root_ok]:
            diagnostics.append({"start": int(i), "reason": "scale root not bracketable"})
        log_s[idx] = np.where(root_ok, ls, np.nan)
        idx = idx[root_ok]
    if idx.size == 0:
        raise EstimationError("all starts are degenerate", diagnostics)

    l_, s_, ls_, ok, _, _ = _irls_s(y, spec, locs[idx].copy(), shapes[idx].copy(), log_s[idx].copy(), max_csteps)
    for i in idx[~ok]:
        diagnostics.append({"start": int(i), "reason": "weighted scatter became singular"})
    idx, l_, s_, ls_ = idx[ok], l_[ok], s_[ok], ls_[ok]
    if idx.size == 0:
        raise EstimationError("all starts degenerated during concentration", diagnostics)

    # stable sort keeps the lowest start index first among ties
    order = np.argsort(ls_, kind="stable")[:n_best_kept]
    idx, l_, s_, ls_ = idx[order], l_[order], s_[order], ls_[order]
    l_, s_, ls_, ok, iters, conv = _irls_s(y, spec, l_, s_, ls_, max_refine_iter, tol=refine_tol)
    for i in idx[~ok]:
        diagnostics.append({"start": int(i), "reason": "weighted scatter became singular"})
    if not ok.any():
        raise EstimationError("all kept candidates degenerated during refinement", diagnostics)

    logdet = np.where(ok, 2 * p * ls_, np.inf)
    best = int(np.flatnonzero(logdet == logdet.min())[0])
    loc, shape, log_scale = l_[best], s_[best], ls_[best]
    scatter = shape * math.exp(2.0 * log_scale)
    scatter = 0.5 * (scatter + scatter.T)
    dist = statistical_distances(y, loc, scatter)
    return FitResult(
        location=loc,
        scatter=scatter,
        distances=dist,
        weights=spec.weight(dist),
        objective=float(np.linalg.det(scatter)),
        converged=bool(conv[best]),
        iterations=int(iters[best]) + max_csteps,
        method="S",
        spec=spec,
        diagnostics={
            "best_start": int(idx[best]),
            "n_starts": int(m),
            "discarded": diagnostics,
            "candidate_log_dets": [float(v) for v in logdet],
        },
    )


# -- MM-estimator ------------------------------------------------------------


def mm_estimate(data, s_fit, spec_eff, tol=1e-10, max_iter=1000):
    """MM-estimate started from an S fit.

    The S scale ``det(C_S)^(1/2p)`` is held fixed while location and
    unit-determinant shape are re-estimated by IRLS with the weights of
    ``spec_eff``. The returned scatter therefore has determinant det(C_S).
    """
    data = as_data_matrix(data)
    y = data.values
    n, p = y.shape
    if s_fit.method != "S":
        raise ValueError("mm_estimate needs an S fit as its start")
    if spec_eff.p != p:
        raise ValueError("spec_eff dimension does not match the data")
    log_det_s = float(np.linalg.slogdet(s_fit.scatter)[1])
    sigma = math.exp(log_det_s / (2 * p))
    loc = s_fit.location.copy()
    shape = s_fit.scatter / sigma**2
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d = statistical_distances(y, loc, shape) / sigma
        w = spec_eff.weight(d)
        if (w > 0).sum() < p + 1:
            raise EstimationError("MM weights collapsed onto fewer than p + 1 points")
        new_loc = w @ y / w.sum()
        resid = y - new_loc
        v = (resid * w[:, None]).T @ resid
        if not _well_conditioned(v):
            raise EstimationError("MM weighted scatter became singular")
        new_shape, _ = _normalize_shape(v)
        change = max(
            np.max(np.abs(new_loc - loc)) / (1.0 + np.max(np.abs(loc))),
            np.max(np.abs(new_shape - shape)) / np.max(np.abs(shape)),
        )
        loc, shape = new_loc, 0.5 * (new_shape + new_shape.T)
        if change < tol:
            converged = True
            break
    scatter = shape * sigma**2
    dist = statistical_distances(y, loc, scatter)
    return FitResult(
        location=loc,
        scatter=scatter,
        distances=dist,
        weights=spec_eff.weight(dist),
        objective=float(np.linalg.det(scatter)),
        converged=converged,
        iterations=it,
        method="MM",
        spec=spec_eff,
        diagnostics={"s_log_det": log_det_s, "scale": sigma},
    )


# -- MCD ---------------------------------------------------------------------


def bdp_to_h(n, p, bdp):
    """h = ceil(n (1 - bdp)) clipped to [ceil((n + p + 1)/2), n]."""
    h = math.ceil(n * (1.0 - bdp) - 1e-9)
    return int(min(max(h, math.ceil((n + p + 1) / 2)), n))


def mcd_consistency_factor(h, n, p):
    """(h/n) / P(chi2_{p+2} <= chi2_{p, h/n}); equals 1 for h = n."""
    frac = h / n
    if frac >= 1.0:
        return 1.0
    return frac / stats.chi2.cdf(stats.chi2.ppf(frac, p), p + 2)


def _subset_moments(y, subset):
    sub = y[subset]
    loc = sub.mean(axis=0)
    cov = _ml_cov(sub)
    return loc, cov


def cstep(data, subset_indices):
    """One concentration step.

    Returns the mean and (maximum-likelihood) covariance of the current
    subset and the indices of the ``h`` observations closest to them, sorted
    ascending. Ties in distance go to the lower index.
    """
    y = data.values if isinstance(data, DataMatrix) else np.asarray(data, float)
    if y.ndim == 1:
        y = y[:, None]
    subset = np.sort(np.asarray(subset_indices, dtype=np.int64))
    h = subset.size
    loc, cov = _subset_moments(y, subset)
    if not _well_conditioned(cov):
        raise DegenerateDataError("h-subset covariance is singular")
    dist = statistical_distances(y, loc, cov)
    new = np.sort(np.argsort(dist, kind="stable")[:h])
    return loc, cov, new


def _concentrate(y, subset, max_steps):
    """C-steps until the subset is stable. Returns (subset, logdet, steps, stable)."""
    logdet = np.linalg.slogdet(_ml_cov(y[subset]))[1]
    for step in range(1, max_steps + 1):
        _, _, new = cstep(y, subset)
        if np.array_equal(new, subset):
            return subset, logdet, step, True
        subset = new
        logdet = np.linalg.slogdet(_ml_cov(y[subset]))[1]
    return subset, logdet, max_steps, False



def _closest_h(y, locs, covs, h, diagnostics, reason):
    good = _well_conditioned(covs)
    for i in np.flatnonzero(~good):
        diagnostics.append({"start": int(i), "reason": reason})
    ids = np.flatnonzero(good)
    if ids.size == 0:
        return ids, np.empty((0, h), dtype=np.int64)
    d = _batched_distances(y, locs[ids], covs[ids])
    return ids, np.sort(np.argsort(d, axis=1, kind="stable")[:, :h], axis=1)


def _batched_csteps(y, ids, subsets, steps, diagnostics):
    """``steps`` C-steps on a stack of h-subsets; returns survivors and log dets."""
    h = subsets.shape[1]

    def moments(subsets):
        sub = y[subsets]
        loc = sub.mean(axis=1)
        resid = sub - loc[:, None, :]
        return loc, np.einsum("mhi,mhj->mij", resid, resid) / h

    for step in range(steps + 1):
        if ids.size == 0:
            break
        loc, cov = moments(subsets)
        good = _well_conditioned(cov)
        for i in ids[~good]:
            diagnostics.append({"start": int(i), "reason": "singular h-subset covariance"})
        ids, subsets, loc, cov = ids[good], subsets[good], loc[good], cov[good]
        if step == steps or ids.size == 0:
            break
        d = _batched_distances(y, loc, cov)
        subsets = np.sort(np.argsort(d, axis=1, kind="stable")[:, :h], axis=1)
    logdets = np.linalg.slogdet(cov)[1] if ids.size else np.empty(0)
    return ids, subsets, logdets


def mcd_estimate(
    data,
    h,
    starts,
    max_csteps=2,
    n_best_kept=10,
    reweight=True,
    cutoff_quantile=0.975,
    max_iter=500,
):
    """Minimum covariance determinant estimate via C-steps.

    Parameters
    ----------
    data : DataMatrix or array_like
    h : int
        Subset size, ``ceil((n + p + 1)/2) <= h <= n``.
    starts : SubsetPool or list of (location, scatter)
        Index sets of size ``h`` are used as initial h-subsets directly;
        other index sets and (T, C) pairs seed the h closest observations.
    max_csteps, n_best_kept : int
        C-steps on every start, then the ``n_best_kept`` best are iterated
        until their subset no longer changes.
    reweight : bool
        One-step reweighting: weight 1 iff the raw distance is at most
        ``sqrt(chi2_p(cutoff_quantile))``.

    Returns
    -------
    FitResult
        ``method="MCD"``; ``objective`` is the determinant of the raw
        (unscaled, maximum-likelihood) h-subset covariance.
    """
    data = as_data_matrix(data)
    y = data.values
    n, p = y.shape
    h = int(h)
    h_min = math.ceil((n + p + 1) / 2)
    if not h_min <= h <= n:
        raise ValueError(f"h={h} outside the legal range [{h_min}, {n}]")

    diagnostics = []
    if isinstance(starts, SubsetPool):
        if starts.n != n or starts.p != p:
            raise ValueError("subset pool does not match the data dimensions")
        if starts.subsets.shape[1] == h:
            ids, subsets = np.arange(len(starts)), np.sort(starts.subsets, axis=1)
        else:
            ids, subsets = _closest_h(y, *_starts_from(y, starts), h, diagnostics, "singular starting subset")
    else:
        ids, subsets = _closest_h(y, *_starts_from(y, starts), h, diagnostics, "start scatter not positive definite")
    ids, subsets, logdets = _batched_csteps(y, ids, subsets, max_csteps, diagnostics)
    if ids.size == 0:
        raise EstimationError("all MCD starts are degenerate", diagnostics)
    order = np.lexsort((ids, logdets))
    screened = [(logdets[k], int(ids[k]), subsets[k]) for k in order]

    best = None
    for logdet, i, sub in screened[:n_best_kept]:
        try:
            sub, logdet, steps, stable = _concentrate(y, sub, max_iter)
        except DegenerateDataError:
            diagnostics.append({"start": i, "reason": "singular h-subset covariance"})
            continue
        if best is None or logdet < best[0]:
            best = (logdet, i, sub, steps, stable)
    if best is None:
        raise EstimationError("all kept MCD candidates degenerated", diagnostics)

    _, start_index, subset, steps, stable = best
    raw_loc, raw_cov_ml = _subset_moments(y, subset)
    raw_scatter = raw_cov_ml * mcd_consistency_factor(h, n, p)
    raw_dist = statistical_distances(y, raw_loc, raw_scatter)
    raw_w = np.zeros(n)
    raw_w[subset] = 1.0

    loc, scatter, dist, weights = raw_loc, raw_scatter, raw_dist, raw_w
    if reweight:
        cutoff = math.sqrt(stats.chi2.ppf(cutoff_quantile, p))
        weights = (raw_dist <= cutoff).astype(float)
        keep = weights > 0
        if keep.sum() > p:
            loc = y[keep].mean(axis=0)
            cov = _ml_cov(y[keep])
            if _well_conditioned(cov):
                factor = cutoff_quantile / stats.chi2.cdf(cutoff**2, p + 2)
                scatter = cov * factor
                dist = statistical_distances(y, loc, scatter)
            else:
                loc, scatter = raw_loc, raw_scatter
    return FitResult(
        location=loc,
        scatter=scatter,
        distances=dist,
        weights=weights,
        objective=float(np.linalg.det(raw_cov_ml)),
        converged=bool(stable),
        iterations=int(steps) + max_csteps,
        method="MCD",
        diagnostics={"h": h, "best_start": int(start_index), "subset": subset.tolist(), "discarded": diagnostics},
        raw_location=raw_loc,
        raw_scatter=raw_scatter,
        raw_distances=raw_dist,
        raw_weights=raw_w,
    )


# -- deterministic starts ----------------------------------------------------


def _mad(x, axis=0):
    med = np.median(x, axis=axis)
    return 1.4826 * np.median(np.abs(x - np.expand_dims(med, axis)), axis=axis)


def _robust_scale(x):
    """MAD per column, falling back to the standard deviation where MAD is 0."""
    s = _mad(x)
    sd = x.std(axis=0)
    return np.where(s > 0, s, sd)


def _orthogonal_start(z, corr):
    """Eigenvectors of ``corr``, robust scales of the projections."""
    _, vecs = np.linalg.eigh(corr)
    proj = z @ vecs
    scales = _robust_scale(proj)
    if np.any(scales <= 0):
        raise DegenerateDataError("projection with zero spread")
    loc = vecs @ np.median(proj, axis=0)
    cov = (vecs * scales**2) @ vecs.T
    return loc, cov


def deterministic_starts(data):
    """Six deterministic (location, scatter) starts.

    All starts are computed on data standardised by the coordinatewise
    median and MAD and are transformed back afterwards:

    0. coordinatewise median with diagonal MAD^2 scatter
    1. spatial-sign covariance
    2. Spearman rank correlation
    3. normal-scores correlation
    4. hyperbolic-tangent correlation
    5. mean/covariance of the half of the points closest to the median

    Starts 1-4 use eigenvectors of the respective matrix with robust scales
    of the projections as eigenvalues. No randomness is involved.
    """
    data = as_data_matrix(data)
    x = data.values
    n, p = x.shape
    sd = x.std(axis=0)
    if np.any(sd <= 0) or np.linalg.matrix_rank(x - x.mean(axis=0)) < p:
        raise DegenerateDataError("data do not span p dimensions")
    center = np.median(x, axis=0)
    scale = _robust_scale(x)
    z = (x - center) / scale

    def back(loc, cov):
        return center + scale * loc, cov * np.outer(scale, scale)

    starts = [back(np.zeros(p), np.eye(p))]

    norms = np.linalg.norm(z, axis=1)
    signs = z / np.where(norms > 0, norms, 1.0)[:, None]
    starts.append(back(*_orthogonal_start(z, signs.T @ signs / n)))

    ranks = stats.rankdata(z, axis=0)
    rank_corr = np.corrcoef(ranks, rowvar=False).reshape(p, p)
    starts.append(back(*_orthogonal_start(z, rank_corr)))

    nscores = stats.norm.ppf((ranks - 1.0 / 3.0) / (n + 1.0 / 3.0))
    starts.append(back(*_orthogonal_start(z, np.corrcoef(nscores, rowvar=False).reshape(p, p))))

    tz = np.tanh(z)
    starts.append(back(*_orthogonal_start(z, np.corrcoef(tz, rowvar=False).reshape(p, p))))

    half = np.argsort(norms, kind="stable")[: math.ceil(n / 2)]
    cov_half = _ml_cov(z[half])
    if _well_conditioned(cov_half):
        starts.append(back(z[half].mean(axis=0), cov_half))

    out = []
    for loc, cov in starts:
        cov = 0.5 * (cov + cov.T)
        if _well_conditioned(cov):
            out.append((loc, cov))
    if not out:
        raise DegenerateDataError("no well-conditioned deterministic start")
    return out
