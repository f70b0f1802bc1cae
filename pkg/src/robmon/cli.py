"""Command-line interface.

Subcommands: ``fit``, ``monitor``, ``weights``, ``ellipse``, ``pca`` and
``simulate``. Every run is determined by its arguments and input bytes: all
randomness flows from ``--seed``, from which the subset-pool seed is derived
and echoed in the outputs.

Exit codes: 0 success, 1 input or configuration error, 2 estimation failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .analysis import classical_pca, tolerance_ellipse, weight_comparison
from .datasets import (
    GEYSER_VARIANTS,
    CSVParseError,
    ContaminationSpec,
    generate_skewed,
    generate_two_cluster,
    load_csv,
    load_geyser,
    write_csv,
)
from .estimation import (
    DegenerateDataError,
    EstimationError,
    bdp_to_h,
    deterministic_starts,
    generate_elemental_subsets,
    mcd_estimate,
    mm_estimate,
    s_estimate,
)
from .monitoring import DEFAULT_THRESHOLD, SCHEMA_VERSION, monitor
from .rho import RhoSpec

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATION = 0, 1, 2

DEFAULT_N_STARTS = 500
DEFAULT_S_BDP = 0.5
DEFAULT_A = 0.2
DEFAULT_MM_BDP = 0.45
GRID_TOL = 1e-9


class ConfigError(Exception):
    """Invalid input or inconsistent options (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for estimation failures
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def parse_grid(text):
    """``start:step:end`` inclusive of both ends (within 1e-9)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid {text!r} is not of the form start:step:end")
    try:
        start, step, end = (float(v) for v in parts)
    except ValueError:
        raise ConfigError(f"grid {text!r} contains a non-numeric value") from None
    if not all(math.isfinite(v) for v in (start, step, end)):
        raise ConfigError(f"grid {text!r} must be finite")
    span = end - start
    if span == 0:
        return [start]
    step = math.copysign(abs(step), span) if step != 0 else 0.0
    if step == 0:
        raise ConfigError("grid step must be nonzero")
    count = int(math.floor(span / step + GRID_TOL)) + 1
    # rounding keeps values like 0.5 - 8*0.05 free of representation noise
    return [round(start + k * step, 12) for k in range(count)]


def pool_seed_from(seed):
    """Subset-pool seed derived from the master seed."""
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


# -- argument parsing --------------------------------------------------------


def _add_data_args(p):
    g = p.add_argument_group("input")
    g.add_argument("--data", default="geyser", help="'geyser' for the bundled data or a CSV path (default: geyser)")
    g.add_argument(
        "--variant",
        default="faithful",
        choices=sorted(GEYSER_VARIANTS),
        help="geyser variant (default: faithful, 272 rows)",
    )
    g.add_argument("--no-header", action="store_true", help="CSV input has no header row")
    g.add_argument(
        "--columns",
        default=None,
        help="comma-separated column names to use from the CSV (default: all)",
    )


def _add_estimator_args(p, grid=False):
    g = p.add_argument_group("estimator")
    g.add_argument("--estimator", default="s", choices=["s", "mm", "mcd"], help="default: s")
    g.add_argument("--rho", default="bisquare", choices=["bisquare", "custom"], help="rho family for S (default: bisquare)")
    if grid:
        g.add_argument(
            "--grid",
            required=True,
            help="start:step:end, inclusive; bdp values, or a values for --rho custom",
        )
        g.add_argument(
            "--bdp",
            type=float,
            default=None,
            help=f"breakdown value of the S start for MM sweeps (default: {DEFAULT_S_BDP})",
        )
        g.add_argument(
            "--threshold",
            type=float,
            default=DEFAULT_THRESHOLD,
            help=f"relative change of the distance vector flagged as a transition (default: {DEFAULT_THRESHOLD})",
        )
    else:
        g.add_argument(
            "--bdp",
            type=float,
            default=None,
            help=f"breakdown value: bisquare S, the S start of MM, or MCD (default: {DEFAULT_S_BDP})",
        )
        g.add_argument("--a", type=float, default=None, help=f"flatness of the custom rho (default: {DEFAULT_A})")
        g.add_argument("--h", type=int, default=None, help="MCD subset size (overrides --bdp)")
        g.add_argument(
            "--mm-bdp",
            type=float,
            default=None,
            help=f"breakdown value used to tune the MM bisquare (default: {DEFAULT_MM_BDP})",
        )
    g.add_argument("--no-reweight", action="store_true", help="MCD: report the raw fit")
    g.add_argument("--seed", type=int, default=1, help="master seed (default: 1)")
    g.add_argument(
        "--starts",
        default="elemental",
        choices=["elemental", "deterministic"],
        help="random elemental subsets or the six deterministic starts (default: elemental)",
    )
    g.add_argument(
        "--n-starts",
        type=int,
        default=DEFAULT_N_STARTS,
        help=f"number of elemental subsets (default: {DEFAULT_N_STARTS})",
    )


def build_parser():
    parser = _Parser(prog="robmon", description="Robust location/scatter fits and monitoring.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="fit one estimator")
    _add_data_args(p)
    _add_estimator_args(p)
    p.add_argument("--output", default=None, help="output file (default: standard output)")
    p.add_argument("--format", default="json", choices=["json", "csv"], help="json fit or csv distances/weights (default: json)")

    p = sub.add_parser("monitor", help="refit over a grid of tuning values with one subset pool")
    _add_data_args(p)
    _add_estimator_args(p, grid=True)
    p.add_argument("--output", default=None, help="trace CSV (default: standard output)")
    p.add_argument("--summary", default=None, help="JSON summary (default: OUTPUT with suffix .json)")

    p = sub.add_parser("weights", help="per-observation weights at the MCD distances")
    _add_data_args(p)
    p.add_argument("--bdp", type=float, default=0.5, help="MCD breakdown value (default: 0.5)")
    p.add_argument("--bisquare-bdp", default="0.5", help="comma-separated bisquare breakdown values (default: 0.5)")
    p.add_argument("--custom-a", default="0.2", help="comma-separated custom-rho a values (default: 0.2)")
    p.add_argument("--seed", type=int, default=1, help="master seed (default: 1)")
    p.add_argument("--n-starts", type=int, default=DEFAULT_N_STARTS, help=f"default: {DEFAULT_N_STARTS}")
    p.add_argument("--output", default=None, help="weight-table CSV (default: standard output)")

    p = sub.add_parser("ellipse", help="tolerance-ellipse boundary points")
    p.add_argument("--fit", default=None, help="fit JSON written by 'fit'; otherwise the fit is computed")
    _add_data_args(p)
    _add_estimator_args(p)
    p.add_argument("--level", type=float, default=0.975, help="coverage level (default: 0.975)")
    p.add_argument("--n-points", type=int, default=200, help="number of boundary points (default: 200)")
    p.add_argument("--output", default=None, help="points CSV (default: standard output)")

    p = sub.add_parser("pca", help="classical principal components")
    _add_data_args(p)
    p.add_argument("--k", type=int, default=2, help="number of components (default: 2)")
    p.add_argument("--output", default=None, help="scores CSV (default: standard output)")
    p.add_argument("--summary", default=None, help="JSON with ratios and loadings (default: OUTPUT with suffix .json)")

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("kind", choices=["two-cluster", "skewed"])
    p.add_argument("--n", type=int, default=300, help="number of rows (default: 300)")
    p.add_argument("--epsilon", type=float, default=0.35, help="two-cluster minority fraction (default: 0.35)")
    p.add_argument(
        "--separation",
        type=float,
        default=1.0,
        help="two-cluster scale of the distance between centres (default: 1.0)",
    )
    p.add_argument("--p", type=int, default=2, help="skewed: dimension (default: 2)")
    p.add_argument("--direction", default=None, help="skewed: comma-separated skew direction (default: e1)")
    p.add_argument("--seed", type=int, default=1, help="data seed (default: 1)")
    p.add_argument("--output", default=None, help="data CSV (default: standard output)")
    return parser


# -- helpers -----------------------------------------------------------------


def _load_data(args):
    if args.data == "geyser":
        data = load_geyser(args.variant)
    else:
        path = Path(args.data)
        if not path.is_file():
            raise ConfigError(f"input file not found: {path}")
        try:
            data = load_csv(path, has_header=not args.no_header)
        except (CSVParseError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if args.columns:
        names = [c.strip() for c in args.columns.split(",")]
        missing = [c for c in names if c not in data.column_names]
        if missing:
            raise ConfigError(f"unknown columns {missing}; available: {list(data.column_names)}")
        idx = [data.column_names.index(c) for c in names]
        data = type(data)(data.values[:, idx], tuple(names))
    return data


def _starts(args, data):
    """Returns (starts, pool_seed)."""
    if args.starts == "deterministic":
        return deterministic_starts(data), None
    if args.n_starts < 1:
        raise ConfigError("--n-starts must be positive")
    seed = pool_seed_from(args.seed)
    return generate_elemental_subsets(data.n, data.p, args.n_starts, seed), seed


def _check_fit_config(args):
    est, rho = args.estimator, args.rho
    if args.a is not None and not (est == "s" and rho == "custom"):
        raise ConfigError("--a is only valid with --estimator s --rho custom")
    if args.h is not None and est != "mcd":
        raise ConfigError("--h is only valid with --estimator mcd")
    if args.h is not None and args.bdp is not None:
        raise ConfigError("give either --h or --bdp, not both")
    if rho == "custom" and est != "s":
        raise ConfigError("--rho custom is only available for the S-estimator")
    if est == "s" and rho == "custom" and args.bdp is not None:
        raise ConfigError("--bdp does not apply to the custom rho; use --a")
    if args.mm_bdp is not None and est != "mm":
        raise ConfigError("--mm-bdp is only valid with --estimator mm")
    if args.no_reweight and est != "mcd":
        raise ConfigError("--no-reweight is only valid with --estimator mcd")


def _run_fit(args, data):
    """Fit according to the options; returns (fit, pool_seed)."""
    _check_fit_config(args)
    starts, pool_seed = _starts(args, data)
    p = data.p
    try:
        if args.estimator == "s":
            if args.rho == "custom":
                spec = RhoSpec.custom(p, args.a if args.a is not None else DEFAULT_A)
            else:
                spec = RhoSpec.bisquare(p, bdp=args.bdp if args.bdp is not None else DEFAULT_S_BDP)
            fit = s_estimate(data, spec, starts)
        elif args.estimator == "mm":
            s_spec = RhoSpec.bisquare(p, bdp=args.bdp if args.bdp is not None else DEFAULT_S_BDP)
            eff = RhoSpec.bisquare(p, bdp=args.mm_bdp if args.mm_bdp is not None else DEFAULT_MM_BDP)
            fit = mm_estimate(data, s_estimate(data, s_spec, starts), eff)
        else:
            h = args.h if args.h is not None else bdp_to_h(data.n, p, args.bdp if args.bdp is not None else DEFAULT_S_BDP)
            fit = mcd_estimate(data, h, starts, reweight=not args.no_reweight)
    except (EstimationError, DegenerateDataError, np.linalg.LinAlgError, ArithmeticError):
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return fit, pool_seed


def _floats(a):
    return [float(v) for v in np.ravel(a)]


def fit_to_dict(fit, seed, pool_seed):
    d = {
        "schema_version": SCHEMA_VERSION,
        "method": fit.method,
        "location": _floats(fit.location),
        "scatter": _floats(fit.scatter),
        "distances": _floats(fit.distances),
        "weights": _floats(fit.weights),
        "objective": float(fit.objective),
        "log_det": float(fit.log_det),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "seed": seed,
        "pool_seed": pool_seed,
    }
    if fit.spec is not None:
        d["rho"] = {"family": fit.spec.family.value, "param": fit.spec.param, "k_const": fit.spec.k_const}
    if fit.method == "MCD":
        d["h"] = fit.diagnostics["h"]
        d["raw_weights"] = _floats(fit.raw_weights)
    return d


def _open_out(path):
    if path is None:
        return _StdoutSink()
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


class _StdoutSink:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _companion(path, explicit):
    if explicit is not None:
        return explicit
    if path is None:
        return None
    return str(Path(path).with_suffix(".json"))


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    with _open_out(path) as fh:
        fh.write(text)


def _report(args, line):
    # keep standard output clean when it carries the artifact
    print(line, file=sys.stdout if args.output is not None else sys.stderr)


# -- commands ----------------------------------------------------------------


def cmd_fit(args):
    data = _load_data(args)
    fit, pool_seed = _run_fit(args, data)
    if args.format == "json":
        _write_json(args.output, fit_to_dict(fit, args.seed, pool_seed))
    else:
        import csv

        with _open_out(args.output) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["obs_index", "distance", "weight"])
            for i, (d, wt) in enumerate(zip(fit.distances, fit.weights)):
                w.writerow([i, repr(float(d)), repr(float(wt))])
    _report(args, f"{fit.method}: log_det={fit.log_det:.10g} converged={fit.converged} iterations={fit.iterations}")
    return EXIT_OK


def cmd_monitor(args):
    data = _load_data(args)
    grid = parse_grid(args.grid)
    est, rho = args.estimator, args.rho
    if rho == "custom" and est != "s":
        raise ConfigError("--rho custom is only available for the S-estimator")
    if args.bdp is not None and est != "mm":
        raise ConfigError("--bdp (S start) is only valid with --estimator mm; sweep values go in --grid")
    if args.no_reweight and est != "mcd":
        raise ConfigError("--no-reweight is only valid with --estimator mcd")
    starts, pool_seed = _starts(args, data)
    opts = {"reweight": False} if args.no_reweight else None
    try:
        trace = monitor(
            data,
            est.upper(),
            grid,
            starts,
            rho=rho,
            s_bdp=args.bdp if args.bdp is not None else DEFAULT_S_BDP,
            fit_options=opts,
        )
    except (EstimationError, DegenerateDataError, np.linalg.LinAlgError, ArithmeticError):
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    summary = trace.summary_dict(args.threshold)
    summary.update(seed=args.seed, pool_seed=pool_seed, n_starts=args.n_starts if pool_seed is not None else None)
    with _open_out(args.output) as fh:
        trace.to_csv(fh)
    summary_path = _companion(args.output, args.summary)
    if summary_path is not None:
        _write_json(summary_path, summary)
    n_ok = sum(d is not None for d in trace.distances)
    where = summary["transition_grid_values"]
    _report(
        args,
        f"{trace.estimator} monitoring: {n_ok}/{len(grid)} grid points fitted, transition "
        + ("none" if where is None else f"between {where[0]:g} and {where[1]:g}"),
    )
    return EXIT_OK if n_ok > 0 else EXIT_ESTIMATION


def _float_list(text, flag):
    if not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{flag} must be a comma-separated list of numbers") from None


def cmd_weights(args):
    data = _load_data(args)
    if args.n_starts < 1:
        raise ConfigError("--n-starts must be positive")
    pool_seed = pool_seed_from(args.seed)
    pool = generate_elemental_subsets(data.n, data.p, args.n_starts, pool_seed)
    try:
        specs = [RhoSpec.bisquare(data.p, bdp=b) for b in _float_list(args.bisquare_bdp, "--bisquare-bdp")]
        specs += [RhoSpec.custom(data.p, a) for a in _float_list(args.custom_a, "--custom-a")]
        h = bdp_to_h(data.n, data.p, args.bdp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    mcd = mcd_estimate(data, h, pool)
    table = weight_comparison(data, mcd, specs)
    with _open_out(args.output) as fh:
        table.to_csv(fh)
    _report(args, f"weights: {data.n} observations, h={h}, pool_seed={pool_seed}, columns {', '.join(table.labels)}")
    return EXIT_OK


def _fit_from_json(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"fit file not found: {p}")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
        loc = np.asarray(obj["location"], dtype=float)
        scatter = np.asarray(obj["scatter"], dtype=float).reshape(loc.size, loc.size)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read a fit from {p}: {exc}") from None
    return loc, scatter


def cmd_ellipse(args):
    if args.fit is not None:
        fit = _fit_from_json(args.fit)
    else:
        data = _load_data(args)
        fit, _ = _run_fit(args, data)
    try:
        points = tolerance_ellipse(fit, level=args.level, n_points=args.n_points)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConfigError(str(exc)) from None
    import csv

    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point_index", "x", "y"])
        for i, (x, y) in enumerate(points):
            w.writerow([i, repr(float(x)), repr(float(y))])
    _report(args, f"ellipse: {len(points)} points at level {args.level:g} (chi2 = {stats.chi2.ppf(args.level, 2):.10g})")
    return EXIT_OK


def cmd_pca(args):
    data = _load_data(args)
    try:
        res = classical_pca(data, args.k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    names = [f"pc{j + 1}" for j in range(args.k)]
    import csv

    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["obs_index", *names])
        for i, row in enumerate(res.scores):
            w.writerow([i, *(repr(float(v)) for v in row)])
    summary_path = _companion(args.output, args.summary)
    if summary_path is not None:
        _write_json(
            summary_path,
            {
                "schema_version": SCHEMA_VERSION,
                "k": args.k,
                "columns": list(data.column_names),
                "explained_variance_ratio": _floats(res.explained_variance_ratio),
                "eigenvalues": _floats(res.eigenvalues),
                "loadings": [_floats(res.loadings[:, j]) for j in range(args.k)],
                "mean": _floats(res.mean),
            },
        )
    ratios = ", ".join(f"{r:.6f}" for r in res.explained_variance_ratio)
    _report(args, f"pca: explained variance ratios [{ratios}]")
    return EXIT_OK


def cmd_simulate(args):
    if args.n < 1:
        raise ConfigError("--n must be positive")
    try:
        if args.kind == "two-cluster":
            spec = ContaminationSpec.geyser_like(n=args.n, epsilon=args.epsilon, separation=args.separation, seed=args.seed)
            data, mask = generate_two_cluster(spec)
            extra = {"minority": mask}
        else:
            direction = [1.0] + [0.0] * (args.p - 1) if args.direction is None else _float_list(args.direction, "--direction")
            data = generate_skewed(args.n, args.p, direction, seed=args.seed)
            extra = None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with _open_out(args.output) as fh:
        write_csv(fh, data, extra)
    flagged = f", {int(mask.sum())} minority" if args.kind == "two-cluster" else ""
    _report(args, f"simulate {args.kind}: {data.n} rows{flagged}, seed={args.seed}")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "monitor": cmd_monitor,
    "weights": cmd_weights,
    "ellipse": cmd_ellipse,
    "pca": cmd_pca,
    "simulate": cmd_simulate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimationError, DegenerateDataError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
