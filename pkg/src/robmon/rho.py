"""rho-functions for multivariate S-estimation.

All functions take the *unsquared* statistical distance ``d`` as argument.
Two families are available:

``bisquare``
    Tukey's biweight written in terms of ``d``::

        rho(d) = d**2/2 - d**4/(2 c**2) + d**6/(6 c**4)   for d <= c
               = c**2/6                                   for d > c

``custom``
    A hard-redescending family with flatness parameter ``a >= 0``. It is
    quadratic up to ``sqrt(p)``, bends over on ``(sqrt(p), (1+a) sqrt(p)]``
    and is constant afterwards. The smaller ``a``, the harder the rejection;
    ``a = 0`` gives the truncated quadratic (psi then jumps at ``sqrt(p)``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, stats

__all__ = [
    "RhoFamily",
    "RhoSpec",
    "DomainError",
    "InvalidSpecError",
    "QuadratureError",
    "rho_eval",
    "psi_eval",
    "weight_eval",
    "rho_max",
    "redescent_endpoint",
    "consistency_constant",
    "monte_carlo_constant",
    "breakdown_value",
    "tune_bisquare_for_bdp",
]


class DomainError(ValueError):
    """Raised for negative distances."""


class InvalidSpecError(ValueError):
    """Raised for inconsistent rho-function parameters."""


class QuadratureError(ArithmeticError):
    """Raised when numerical integration or root finding does not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RhoFamily(str, enum.Enum):
    BISQUARE = "bisquare"
    CUSTOM = "custom"


def rho_max(family, p, param):
    """Supremum of rho for the given family parameters."""
    family = RhoFamily(family)
    if family is RhoFamily.BISQUARE:
        return param**2 / 6.0
    return p * (1.0 + param) / 2.0


def redescent_endpoint(family, p, param):
    """Distance beyond which rho is constant and psi, w vanish."""
    family = RhoFamily(family)
    if family is RhoFamily.BISQUARE:
        return float(param)
    return (1.0 + param) * math.sqrt(p)


def _check_params(family, p, param):
    if int(p) != p or p < 1:
        raise InvalidSpecError(f"dimension p must be a positive integer, got {p}")
    if family is RhoFamily.BISQUARE and not param > 0:
        raise InvalidSpecError(f"bisquare cutoff c must be > 0, got {param}")
    if family is RhoFamily.CUSTOM and not param >= 0:
        raise InvalidSpecError(f"custom flatness a must be >= 0, got {param}")
    if not np.isfinite(param):
        raise InvalidSpecError("tuning parameter must be finite")


def _as_distance(d):
    d = np.asarray(d, dtype=float)
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise DomainError("distances must be nonnegative")
    return d


# -- raw family kernels, vectorised over d ---------------------------------


def _rho_raw(family, p, param, d):
    if family is RhoFamily.BISQUARE:
        c = param
        r = np.minimum(d, c)
        r2 = (r / c) ** 2
        # c^2/6 * (1 - (1 - r^2/c^2)^3) expanded, kept in factored form
        return c * c / 6.0 * (1.0 - (1.0 - r2) ** 3)
    a = param
    sp = math.sqrt(p)
    out = np.empty_like(d)
    inner = d <= sp
    flat = d > (1.0 + a) * sp
    mid = ~inner & ~flat
    out[inner] = 0.5 * d[inner] ** 2
    if np.any(mid):
        u = d[mid] - sp
        out[mid] = 0.5 * p + sp * u - u * u / (2.0 * a)
    out[flat] = 0.5 * p * (1.0 + a)
    return out


def _psi_raw(family, p, param, d):
    # defined through w so that psi(d) == d * w(d) holds bit for bit
    return d * _weight_raw(family, p, param, d)


def _weight_raw(family, p, param, d):
    if family is RhoFamily.BISQUARE:
        c = param
        return np.where(d <= c, (1.0 - (d / c) ** 2) ** 2, 0.0)
    a = param
    sp = math.sqrt(p)
    out = np.zeros_like(d)
    inner = d <= sp
    mid = ~inner & (d <= (1.0 + a) * sp)
    out[inner] = 1.0
    if np.any(mid):
        dm = d[mid]
        out[mid] = ((1.0 + a) * sp - dm) / (a * dm)
    return out


@dataclass(frozen=True)
class RhoSpec:
    """A rho-function bound to a dimension, with its constraint constant.

    Parameters
    ----------
    family : RhoFamily or str
        ``"bisquare"`` or ``"custom"``.
    p : int
        Data dimension.
    param : float
        Cutoff ``c`` (bisquare) or flatness ``a`` (custom).
    k_const : float
        Right-hand side ``K`` of the S-estimator constraint. Must lie strictly
        between 0 and ``rho_max``.
    """

    family: RhoFamily
    p: int
    param: float
    k_const: float
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", RhoFamily(self.family))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "param", float(self.param))
        object.__setattr__(self, "k_const", float(self.k_const))
        _check_params(self.family, self.p, self.param)
        if not 0.0 < self.k_const < self.rho_max:
            raise InvalidSpecError(
                f"k_const={self.k_const} must lie in (0, rho_max={self.rho_max})"
            )
        if not self.label:
            name = "c" if self.family is RhoFamily.BISQUARE else "a"
            object.__setattr__(self, "label", f"{self.family.value}_{name}{self.param:g}")

    @classmethod
    def bisquare(cls, p, c=None, bdp=None, k_const=None):
        """Bisquare spec from either a cutoff ``c`` or a breakdown value ``bdp``.

        When ``bdp`` is given, ``c`` is solved for and ``K = bdp * c**2 / 6``.
        Otherwise ``K`` defaults to the Gaussian-consistent value.
        """
        if (c is None) == (bdp is None):
            raise InvalidSpecError("give exactly one of c or bdp")
        if bdp is not None:
            c = tune_bisquare_for_bdp(p, bdp)
            if k_const is None:
                k_const = bdp * c * c / 6.0
            return cls(RhoFamily.BISQUARE, p, c, k_const, label=f"bisquare_bdp{bdp:g}")
        if k_const is None:
            k_const = consistency_constant(RhoFamily.BISQUARE, p, c)
        return cls(RhoFamily.BISQUARE, p, c, k_const)

    @classmethod
    def custom(cls, p, a, k_const=None):
        """Custom hard-redescending spec; ``K`` defaults to E[rho(||Z||)]."""
        if k_const is None:
            k_const = consistency_constant(RhoFamily.CUSTOM, p, a)
        return cls(RhoFamily.CUSTOM, p, a, k_const)

    @property
    def rho_max(self):
        return rho_max(self.family, self.p, self.param)

    @property
    def endpoint(self):
        return redescent_endpoint(self.family, self.p, self.param)

    def rho(self, d):
        d = _as_distance(d)
        return _rho_raw(self.family, self.p, self.param, np.atleast_1d(d)).reshape(d.shape)

    def psi(self, d):
        d = _as_distance(d)
        return _psi_raw(self.family, self.p, self.param, np.atleast_1d(d)).reshape(d.shape)

    def weight(self, d):
        d = _as_distance(d)
        return _weight_raw(self.family, self.p, self.param, np.atleast_1d(d)).reshape(d.shape)

    def with_k(self, k_const):
        return RhoSpec(self.family, self.p, self.param, k_const, label=self.label)


def _scalar_or_array(x, d):
    return float(x) if np.ndim(d) == 0 else x


def rho_eval(spec, d):
    """rho(d) for a RhoSpec; scalar in, scalar out."""
    return _scalar_or_array(spec.rho(d), d)


def psi_eval(spec, d):
    """psi(d) = rho'(d)."""
    return _scalar_or_array(spec.psi(d), d)


def weight_eval(spec, d):
    """w(d) = psi(d)/d, with w(0) = 1."""
    return _scalar_or_array(spec.weight(d), d)


def consistency_constant(family, p, param, method="quadrature", n_samples=1_000_000, seed=0):
    """K = E[rho(||Z||)] for Z standard p-variate normal.

    Parameters
    ----------
    family : RhoFamily or str
    p : int
    param : float
        ``c`` for the bisquare, ``a`` for the custom family.
    method : {"quadrature", "montecarlo"}
        Quadrature integrates rho against the chi(p) density up to the
        redescent endpoint and adds the exact constant tail.
    n_samples, seed : int
        Monte Carlo settings; ``n_samples`` must be at least 1e4.

    Returns
    -------
    float
    """
    family = RhoFamily(family)
    _check_params(family, p, param)
    method = str(method).lower().replace("_", "").replace("-", "")
    if method == "quadrature":
        return _quadrature_constant(family, int(p), float(param))
    if method == "montecarlo":
        return monte_carlo_constant(family, p, param, n_samples=n_samples, seed=seed)[0]
    raise ValueError(f"unknown method {method!r}")


def _quadrature_constant(family, p, param):
    end = redescent_endpoint(family, p, param)
    top = rho_max(family, p, param)
    chi = stats.chi(p)
    # beyond this the chi(p) mass is negligible in double precision
    hi = min(end, float(chi.isf(1e-17)))
    breaks = [math.sqrt(p)] if family is RhoFamily.CUSTOM and 0 < math.sqrt(p) < hi else None

    def integrand(r):
        return _rho_raw(family, p, param, np.array([r]))[0] * chi.pdf(r)

    val, abserr, info = integrate.quad(
        integrand, 0.0, hi, points=breaks, epsabs=1e-13, epsrel=1e-12, limit=200, full_output=1
    )[:3]
    if abserr > 1e-8 * max(1.0, abs(val)) or not np.isfinite(val):
        raise QuadratureError(
            "quadrature for the consistency constant did not converge",
            {"value": val, "abserr": abserr, "neval": info.get("neval"), "p": p, "param": param},
        )
    return float(val + top * chi.sf(end))


def monte_carlo_constant(family, p, param, n_samples=1_000_000, seed=0, chunk=250_000):
    """Monte Carlo estimate of E[rho(||Z||)] and its standard error.

    Returns
    -------
    (K, se) : tuple of float
    """
    family = RhoFamily(family)
    _check_params(family, p, param)
    if n_samples < 10_000:
        raise ValueError("Monte Carlo needs at least 1e4 samples")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    left = int(n_samples)
    while left > 0:
        m = min(chunk, left)
        r = np.linalg.norm(rng.standard_normal((m, int(p))), axis=1)
        v = _rho_raw(family, p, param, r)
        total += v.sum()
        total_sq += (v * v).sum()
        left -= m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return float(mean), float(math.sqrt(var / n_samples))


def breakdown_value(spec):
    """min(K/rho_max, 1 - K/rho_max) for a RhoSpec."""
    ratio = spec.k_const / spec.rho_max
    if not 0.0 < ratio < 1.0:
        raise InvalidSpecError("k_const must lie strictly between 0 and rho_max")
    return min(ratio, 1.0 - ratio)


def tune_bisquare_for_bdp(p, bdp):
    """Bisquare cutoff ``c`` with E[rho_c(||Z||)] = bdp * c**2/6.

    The ratio E[rho_c]/rho_max(c) decreases from 1 to 0 as ``c`` grows, so
    the root is unique; it is bracketed by doubling and then polished.
    """
    if not 0.0 < bdp <= 0.5:
        raise ValueError(f"bdp must lie in (0, 0.5], got {bdp}")

    def excess(logc):
        c = math.exp(logc)
        return _quadrature_constant(RhoFamily.BISQUARE, int(p), c) / (c * c / 6.0) - bdp

    lo, hi = math.log(0.5), math.log(2.0 * math.sqrt(p) + 2.0)
    for _ in range(60):
        if excess(lo) > 0:
            break
        lo -= 1.0
    else:
        raise QuadratureError("could not bracket bisquare cutoff from below", {"p": p, "bdp": bdp})
    for _ in range(60):
        if excess(hi) < 0:
            break
        hi += 1.0
    else:
        raise QuadratureError("could not bracket bisquare cutoff from above", {"p": p, "bdp": bdp})
    root = optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(root)
