"""Command-line interface: ``echeuristic {approx,sigma,simulate,validate}``.

Experiment parameters come from an INI config (``--config``); most of them
can also be given or overridden with flags.  Tables go to stdout unless
``--out DIR`` is given.  ``validate`` always writes ``diff.csv`` (or
``diff.json``) and ``validate.json``, into ``--out`` or the working
directory.

Exit codes: 0 success, 2 invalid configuration, 3 insufficient signal for
the exponent fit, 4 sampler construction failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import critical_variance as cv
from .config import ConfigError, ExperimentConfig, load_config, parse_floats
from .ec_heuristic import ParameterSpace, Shape, ec_approximation
from .experiment import (
    InsufficientSignal,
    build_sampler,
    run_paired,
    sigma_report,
    validate_theorem,
)
from .field_sim import SamplerError

EXIT_OK, EXIT_CONFIG, EXIT_SIGNAL, EXIT_SAMPLER = 0, 2, 3, 4
DIFF_COLUMNS = ("u", "diff_mean", "diff_se", "ec_mean", "tail_est", "n")
SIMULATE_COLUMNS = ("u", "mean_ec", "se_ec", "tail_estimate", "se_tail", "n_paths")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _floats(text: str) -> tuple[float, ...]:
    try:
        return parse_floats(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # shared by the top-level parser and each subcommand, so flags may appear
    # on either side of the subcommand name
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", type=Path, default=default, help="experiment config file (INI)")
    g.add_argument("--seed", type=_seed, default=default, help="master seed (overrides [mc] seed)")
    g.add_argument("--out", type=Path, default=default, help="output directory")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS if suppress else "csv",
                   help="table format (default csv)")
    return p


def _experiment_flags(p: argparse.ArgumentParser, covariance: bool = True, mc: bool = True) -> None:
    if covariance:
        p.add_argument("--family", help="squared_exponential | cosine_mixture | latitude_circle")
        p.add_argument("--params", type=_floats, help="covariance parameters, comma separated")
        p.add_argument("--raw-time", action="store_true",
                       help="keep the covariance's own time scale instead of normalizing -R''(0) to 1")
    p.add_argument("--shape", choices=[s.value for s in Shape])
    p.add_argument("--dims", type=_floats, help="T | side lengths | area,perimeter")
    p.add_argument("--u", dest="u_grid", type=_floats, help="level grid, comma separated")
    if mc:
        p.add_argument("--n-grid", type=int)
        p.add_argument("--pad-factor", type=int)
        p.add_argument("--n-paths", type=int)
        p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echeuristic",
        description="Expected Euler characteristic approximation, critical variance and Monte Carlo validation.",
        parents=[_global_flags(False)],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    shared = [_global_flags(True)]

    ap = sub.add_parser("approx", parents=shared, help="tabulate the expected-EC approximation")
    _experiment_flags(ap, covariance=False, mc=False)
    ap.add_argument("--lambda2", type=float, help="second spectral moment (default: from config, else 1)")

    sp = sub.add_parser("sigma", parents=shared, help="critical variance report (JSON)")
    _experiment_flags(sp, mc=False)
    sp.add_argument("--finite-kl", type=Path, metavar="FILE",
                    help="embedding grid: one whitespace-separated row of components per point")
    sp.add_argument("--dphi", type=Path, metavar="FILE", help="tangent vectors matching --finite-kl")
    sp.add_argument("--period", type=float, default=2 * math.pi, help="parameter period of the closed curve")

    mp = sub.add_parser("simulate", parents=shared, help="simulated mean EC and tail estimate per level")
    _experiment_flags(mp)

    vp = sub.add_parser("validate", parents=shared, help="paired Diff(u), exponent fit and verdict")
    _experiment_flags(vp)
    vp.add_argument("--min-signal-k", type=float)
    vp.add_argument("--tol-exp", type=float)
    vp.add_argument("--no-timing", action="store_true",
                    help="write runtime_s as null so reruns are byte-identical")
    return parser


_OVERRIDES = {
    "family": "family", "params": "params", "shape": "shape", "dims": "dims", "u_grid": "u_grid",
    "n_grid": "n_grid", "pad_factor": "pad_factor", "n_paths": "n_paths", "workers": "workers",
    "seed": "master_seed", "min_signal_k": "min_signal_k", "tol_exp": "tol_exp",
}


def _experiment_config(args) -> ExperimentConfig:
    kw = {field: getattr(args, flag) for flag, field in _OVERRIDES.items() if getattr(args, flag, None) is not None}
    if getattr(args, "raw_time", False):
        kw["normalize"] = False
    if getattr(args, "config", None) is not None:
        return load_config(args.config).with_overrides(**kw)
    missing = [f"--{k.replace('_', '-')}" for k in ("family", "params", "shape", "dims", "u_grid") if k not in kw]
    if missing:
        raise ConfigError("no --config given; missing " + ", ".join(missing).replace("--u-grid", "--u"))
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / name).write_text(text)


def _table(columns, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(columns, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_approx(args) -> None:
    lam = args.lambda2
    shape, dims, u_grid = args.shape, args.dims, args.u_grid
    if args.config is not None:
        cfg = load_config(args.config)
        shape, dims, u_grid = shape or cfg.shape, dims or cfg.dims, u_grid or cfg.u_grid
        lam = cfg.covariance().lambda2 if lam is None else lam
    if shape is None or dims is None or u_grid is None:
        raise ConfigError("approx needs --shape, --dims and --u (or a config)")
    try:
        space = ParameterSpace(Shape(shape), dims, 1.0 if lam is None else lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    for u in u_grid:
        approx = ec_approximation(space, u)
        rows.append((u, *map(float, approx.terms), approx.total))
    columns = ("u", *(f"term_{j}" for j in range(space.dim + 1)), "p_hat")
    _emit(args, f"approx.{args.format}", _table(columns, rows, args.format))


def _read_grid(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc}") from exc


def cmd_sigma(args) -> None:
    if args.finite_kl is not None:
        phi = _read_grid(args.finite_kl)
        dphi = _read_grid(args.dphi) if args.dphi is not None else None
        try:
            model = cv.FiniteKLModel(phi, dphi, args.period)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        report = cv.sigma_critical_finite_kl(model)
    else:
        if args.config is None and args.u_grid is None:
            args.u_grid = (1.0,)  # levels play no part in the sigma report
        report = sigma_report(_experiment_config(args))
    _emit(args, "sigma.json", _json(report.to_dict()))


def cmd_simulate(args) -> None:
    cfg = _experiment_config(args)
    run = run_paired(build_sampler(cfg), cfg.u_grid, cfg.n_paths, cfg.master_seed,
                     "1d" if Shape(cfg.shape) is Shape.INTERVAL else "2d", cfg.workers)
    rows = [(e.u, e.ec_mean, e.ec_se, e.tail_est, e.tail_se, e.n) for e in run.estimates()]
    _emit(args, f"simulate.{args.format}", _table(SIMULATE_COLUMNS, rows, args.format))


def cmd_validate(args) -> None:
    cfg = _experiment_config(args)
    report = validate_theorem(cfg)
    out = args.out if args.out is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    (out / f"diff.{args.format}").write_text(_table(DIFF_COLUMNS, [e.row() for e in report.estimates], args.format))
    (out / "validate.json").write_text(_json(report.to_dict(timing=not args.no_timing)))
    verdict = "consistent" if report.verdict else "NOT consistent"
    slope = "n/a" if report.slope is None else f"{report.slope:.4f} +/- {report.slope_se:.4f}"
    print(f"sigma_c^2={report.sigma.sigma_c_sq:.6g} bound={report.bound:.6g} slope={slope} "
          f"points={report.points_used} verdict: {verdict} with the bound", file=sys.stderr)


COMMANDS = {"approx": cmd_approx, "sigma": cmd_sigma, "simulate": cmd_simulate, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientSignal as exc:
        hint = "" if exc.largest_usable_u is None else f" (largest usable u = {exc.largest_usable_u})"
        print(f"error: insufficient signal: {exc}{hint}", file=sys.stderr)
        return EXIT_SIGNAL
    except (SamplerError, NotImplementedError) as exc:
        print(f"error: sampler construction failed: {exc}", file=sys.stderr)
        return EXIT_SAMPLER
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
