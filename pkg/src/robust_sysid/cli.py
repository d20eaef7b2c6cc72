"""``robust-sysid`` command line.

Exit codes: 0 success, 2 configuration error, 3 solver hard failure,
4 I/O or input-format error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import estimation_error_bound
from .certifier import METHODS, certify_via_xi, check_singular_value_nsp, nsp_verdict
from .errors import EnumerationCapError, LPError, NotDecomposableError, RankDeficientError
from .estimator import SolverConfig, solve_lasso, solve_least_squares
from .experiments import (
    ConfigError,
    ExperimentConfig,
    run_certification_sweep,
    run_error_curve,
    simulate_experiment_trial,
    write_curve_csv,
    write_sweep_csv,
)
from .lti import IndexSet, SystemMatrices, read_trajectory_csv, write_trajectory_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

log = logging.getLogger("robust_sysid")


class InputFormatError(ValueError):
    """Malformed input file (mapped to the I/O exit code)."""


def _read_traj(path):
    try:
        return read_trajectory_csv(path)
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None


def _parse_support(text: str, horizon: int) -> IndexSet:
    text = text.strip()
    if not text:
        return IndexSet((), horizon)
    try:
        idx = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ConfigError(f"--support must be comma-separated integers, got {text!r}") from None
    try:
        return IndexSet(idx, horizon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _support(args, traj) -> IndexSet:
    if args.support is not None:
        return _parse_support(args.support, traj.horizon)
    if traj.disturbances is None:
        raise ConfigError("no --support given and the trajectory has no disturbance columns")
    norms = np.linalg.norm(traj.disturbances, axis=0)
    return IndexSet.from_mask(norms > args.support_tol)


def _methods(text):
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
    return methods


def _load_system(path) -> SystemMatrices:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: {exc}") from None
    try:
        a = np.asarray(doc["a"], dtype=float)
        b = doc.get("b")
        return SystemMatrices(a, None if b is None else np.asarray(b, dtype=float).reshape(a.shape[0], -1))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"{path}: bad system document ({exc})") from None


def _system_doc(sys_: SystemMatrices) -> dict:
    return {"a": sys_.a.tolist(), "b": sys_.b.tolist()}


def _emit(doc, out):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _finite(v):
    return v if v is None or math.isfinite(v) else str(v)


def cmd_simulate(args):
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    sys_, traj, support = simulate_experiment_trial(config, args.seed)
    write_trajectory_csv(traj, args.out)
    if args.system_out:
        Path(args.system_out).write_text(json.dumps(_system_doc(sys_), indent=2) + "\n")
    log.info("wrote %d steps, %d attacked, to %s", traj.horizon, len(support), args.out)
    return EXIT_OK


def cmd_estimate(args):
    traj = _read_traj(args.trajectory)
    if args.method == "least_squares":
        est = solve_least_squares(traj)
        doc = {"a_hat": est.a.tolist(), "b_hat": est.b.tolist(), "method": "least_squares"}
    else:
        cfg = SolverConfig(penalty=args.penalty, max_iters=args.max_iters)
        res = solve_lasso(traj, cfg)
        doc = res.to_dict()
        doc["method"] = "lasso"
        if not args.with_d:
            doc.pop("d_hat")
        est = res.sys_hat
    if args.truth:
        truth = _load_system(args.truth)
        doc["err_fro"] = float(np.linalg.norm(est.theta - truth.theta))
    _emit(doc, args.out)
    return EXIT_OK


def cmd_certify(args):
    traj = _read_traj(args.trajectory)
    s_set = _support(args, traj)
    methods = _methods(args.methods)
    if len(methods) == 1 and methods[0] == "singular_value":
        report = check_singular_value_nsp(traj, s_set, args.c)
    elif len(methods) == 1:
        report = certify_via_xi(traj, s_set, methods[0], args.subset_cap)
    else:
        report = nsp_verdict(traj, s_set, methods, args.subset_cap)
    doc = report.to_dict()
    doc["support"] = list(s_set)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_bound(args):
    traj = _read_traj(args.trajectory)
    s_set = _support(args, traj)
    c = args.c
    if c is None:
        report = nsp_verdict(traj, s_set, _methods(args.methods), args.subset_cap)
        c = report.c_achieved
        if c is None or not c < 1:
            raise ConfigError(
                f"no certificate with c < 1 (best: {report.method}, c = {_finite(c)}); "
                "pass --c to evaluate the bound for an externally known constant"
            )
    bound = estimation_error_bound(float(c), traj, s_set)
    doc = {
        "c": bound.c,
        "noise_mass": bound.noise_mass,
        "sigma_min_data": bound.sigma_min_data,
        "bound": bound.bound,
        "support": list(s_set),
    }
    if args.truth:
        truth = _load_system(args.truth)
        res = solve_lasso(traj)
        err = float(np.linalg.norm(res.sys_hat.theta - truth.theta))
        doc["err_fro"] = err
        doc["tightness"] = err / bound.bound if bound.bound > 0 else _finite(math.inf)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_experiment(args):
    config = ExperimentConfig.load(args.config)
    rows = run_error_curve(config, workers=args.threads)
    write_curve_csv(rows, args.out)
    bad = sum(not r.converged for r in rows)
    if bad:
        log.warning("%d of %d rows did not converge", bad, len(rows))
    if args.plot:
        from .plotting import emit_plots

        emit_plots(args.out, args.plot)
    return EXIT_OK


def cmd_sweep(args):
    config = ExperimentConfig.load(args.config)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    _, rows = run_certification_sweep(config, sizes, workers=args.threads)
    write_sweep_csv(rows, args.out)
    if args.plot:
        from .plotting import emit_plots

        emit_plots(args.out, args.plot)
    return EXIT_OK


def cmd_plot(args):
    from .plotting import emit_plots

    try:
        emit_plots(args.csv, args.output)
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None
    return EXIT_OK


def _add_support_args(p):
    p.add_argument("--support", help="comma-separated attacked indices (default: nonzero d columns)")
    p.add_argument("--support-tol", type=float, default=0.0,
                   help="column-norm threshold when reading the support from d")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--subset-cap", type=int, default=10**6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-sysid",
        description="Identify LTI systems from trajectories with sparse adversarial disturbances.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a random system and attacked trajectory")
    p.add_argument("--config", help="flat JSON experiment config (defaults otherwise)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trajectory CSV")
    p.add_argument("--system-out", help="write the true system as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate (A, B) from a trajectory CSV")
    p.add_argument("trajectory")
    p.add_argument("--method", choices=("lasso", "least_squares"), default="lasso")
    p.add_argument("--penalty", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=50000)
    p.add_argument("--with-d", action="store_true", help="include the estimated disturbances")
    p.add_argument("--truth", help="system JSON; adds err_fro to the output")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("certify", help="null space property certificates")
    p.add_argument("trajectory")
    _add_support_args(p)
    p.add_argument("--c", type=float, default=1.0, help="target constant for singular_value alone")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bound", help="estimation error bound for a certified trajectory")
    p.add_argument("trajectory")
    _add_support_args(p)
    p.add_argument("--c", type=float, help="use this NSP constant instead of certifying")
    p.add_argument("--truth", help="system JSON; also report the actual error and tightness")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("experiment", help="error-vs-time curves for both estimators")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="also render the curve to this file")
    p.add_argument("--threads", type=int, help="overrides ROBUST_SYSID_THREADS")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="certification frequency against attack-set size")
    p.add_argument("--config", required=True)
    p.add_argument("--sizes", required=True, help="comma-separated |S| values")
    p.add_argument("--out", required=True)
    p.add_argument("--plot")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render a curve or sweep CSV")
    p.add_argument("csv")
    p.add_argument("output")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankDeficientError, NotDecomposableError, EnumerationCapError, LPError,
            np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, InputFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # remaining ValueErrors come from argument values that failed validation
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
