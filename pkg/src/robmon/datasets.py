"""Bundled and synthetic datasets, CSV input/output."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .estimation import DataMatrix

__all__ = [
    "ContaminationSpec",
    "CSVParseError",
    "GEYSER_VARIANTS",
    "load_geyser",
    "geyser_minority_mask",
    "generate_two_cluster",
    "generate_skewed",
    "load_csv",
    "write_csv",
]

# Old Faithful variants; columns are (eruption duration, waiting time)
GEYSER_VARIANTS = {
    # R datasets::faithful, 272 eruptions
    "faithful": "geyser_faithful.csv",
    # Azzalini & Bowman (1990), MASS::geyser, 299 eruptions
    "azzalini_bowman": "geyser_azzalini_bowman.csv",
}

# duration split separating the short-eruption cluster
GEYSER_SPLIT_MINUTES = 3.0


class CSVParseError(ValueError):
    """Malformed CSV input; ``row`` and ``column`` are 1-based file positions."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


def load_geyser(variant="faithful"):
    """Old Faithful eruption data as a DataMatrix.

    Parameters
    ----------
    variant : {"faithful", "azzalini_bowman"}
        ``"faithful"`` is the 272-row R ``faithful`` data. ``"azzalini_bowman"``
        is the 299-row series of Azzalini & Bowman (MASS ``geyser``), with
        the columns reordered to (duration, waiting).
    """
    try:
        fname = GEYSER_VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown geyser variant {variant!r}; choose from {sorted(GEYSER_VARIANTS)}")
    with resources.files("robmon.data").joinpath(fname).open("r", encoding="utf-8") as fh:
        return _parse_csv(fh, has_header=True, source=fname)


def geyser_minority_mask(data):
    """Short eruptions (duration below 3 minutes)."""
    return np.asarray(data.values[:, 0] < GEYSER_SPLIT_MINUTES)


@dataclass(frozen=True)
class ContaminationSpec:
    """Two-component Gaussian mixture with exact component counts."""

    n: int
    epsilon: float
    majority_mean: tuple
    majority_cov: tuple
    minority_mean: tuple
    minority_cov: tuple
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError("epsilon must lie in [0, 0.5)")
        if self.epsilon > 0 and self.n_minority < 1:
            raise ValueError("epsilon * n must give at least one minority point")
        for name in ("majority_cov", "minority_cov"):
            cov = np.asarray(getattr(self, name), dtype=float)
            if cov.shape != (self.p, self.p) or not np.allclose(cov, cov.T):
                raise ValueError(f"{name} must be a symmetric {self.p}x{self.p} matrix")
            if np.linalg.eigvalsh(cov)[0] <= 0:
                raise ValueError(f"{name} is not positive definite")

    @property
    def p(self):
        return len(self.majority_mean)

    @property
    def n_majority(self):
        return math.ceil((1.0 - self.epsilon) * self.n - 1e-9)

    @property
    def n_minority(self):
        return self.n - self.n_majority

    @classmethod
    def geyser_like(cls, n=300, epsilon=0.35, separation=1.0, seed=0):
        """Elongated majority with a tight minority cluster nearby.

        The layout mimics standardised geyser data; ``separation`` scales the
        distance between the two centres.
        """
        return cls(
            n=n,
            epsilon=epsilon,
            majority_mean=(0.0, 0.0),
            majority_cov=((1.0, 0.375), (0.375, 1.0)),
            minority_mean=(-5.5 * separation, -4.25 * separation),
            minority_cov=((0.42, 0.19), (0.19, 0.95)),
            seed=seed,
        )


def generate_two_cluster(spec):
    """Sample the mixture; majority rows first, then minority rows.

    Returns
    -------
    (DataMatrix, mask) : mask is True on minority rows.
    """
    rng = np.random.default_rng(spec.seed)
    maj = rng.multivariate_normal(spec.majority_mean, spec.majority_cov, size=spec.n_majority, method="cholesky")
    mino = rng.multivariate_normal(spec.minority_mean, spec.minority_cov, size=spec.n_minority, method="cholesky")
    values = np.vstack([maj, mino.reshape(-1, spec.p)])
    mask = np.zeros(spec.n, dtype=bool)
    mask[spec.n_majority:] = True
    return DataMatrix(values), mask


def generate_skewed(n, p, skew_direction, seed=0, noise=0.5, fan=0.5):
    """Unimodal right-skewed cloud.

    Points are ``t u + (1 + fan t) g_perp + noise g_u`` with ``t`` centred
    Exp(1) along the unit vector ``u`` and Gaussian noise ``g``; the spread
    orthogonal to ``u`` widens with ``t`` so the cloud fans out, while
    orthogonal directions stay symmetric.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    u = np.asarray(skew_direction, dtype=float).reshape(-1)
    if u.size != p:
        raise ValueError("skew_direction must have length p")
    norm = np.linalg.norm(u)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("skew_direction must be a nonzero finite vector")
    u = u / norm
    rng = np.random.default_rng(seed)
    t = rng.exponential(1.0, size=n) - 1.0
    g = rng.standard_normal((n, p))
    along = g @ u
    perp = g - np.outer(along, u)
    values = np.outer(t + noise * along, u) + perp * (1.0 + fan * (t + 1.0))[:, None]
    return DataMatrix(values)


def _parse_csv(fh, has_header, source):
    reader = csv.reader(fh)
    rows = list(reader)
    if not rows or all(not r for r in rows):
        raise CSVParseError(f"{source}: empty file")
    names = None
    start = 0
    if has_header:
        names = tuple(c.strip() for c in rows[0])
        start = 1
    body = []
    width = len(names) if names is not None else None
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row:
            continue
        if width is None:
            width = len(row)
        if len(row) != width:
            raise CSVParseError(f"{source}: expected {width} fields, found {len(row)}", row=lineno)
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise CSVParseError(f"{source}: non-numeric value {cell!r}", row=lineno, column=col) from None
        body.append(vals)
    if not body:
        raise CSVParseError(f"{source}: no data rows")
    return DataMatrix(np.array(body, dtype=float), names or ())


def load_csv(path, has_header=True):
    """Read a numeric CSV file into a DataMatrix.

    Columns are named from the header when present, otherwise ``x1..xp``.
    Errors cite 1-based row (line) and column numbers.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_csv(fh, has_header, str(path))


def write_csv(path_or_file, data, extra_columns=None):
    """Write a DataMatrix with shortest round-trip float formatting."""
    names = list(data.column_names)
    cols = [data.values[:, j] for j in range(data.p)]
    for key, col in (extra_columns or {}).items():
        names.append(key)
        cols.append(np.asarray(col))

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(data.n):
            w.writerow([_fmt(c[i]) for c in cols])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            emit(fh)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))
