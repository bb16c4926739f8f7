"""Command-line interface: ``l2sp VERB [options]``.

Verbs
-----
simulate         Monte Carlo scratch/transfer risks over the config's sweep
boundary         transfer-benefit verdicts under one of four criteria
optimize-source  transfer-optimal vs source-optimal source penalty
fixed-point      fixed-point solver diagnostics over a tau grid
validate         the MC-vs-theory validation suite

Exit codes: 0 success, 1 runtime or convergence failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from l2sp import __version__, tables, validation
from l2sp.config import ConfigError, build_task, load
from l2sp.det_equiv import (ConvergenceError, asymptotic_sides, isotropic_a,
                            isotropic_asymptotic_boundary, spectrum_context)
from l2sp.finite_risk import (BoundaryVerdict, Criterion, boundary_from_terms,
                              isotropic_ridgeless_boundary, replicate_terms, summarize)
from l2sp.linalg import LinalgInputError
from l2sp.source_opt import NoPositiveAlignmentError, optimize_source
from l2sp.store import RunRecord, append_record
from l2sp.task import InfeasibleTaskError

log = logging.getLogger("l2sp")

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2
BOUNDARY_CRITERIA = ("finite", "finite-isotropic", "asymptotic", "asymptotic-isotropic")


class InputError(ValueError):
    """Command-line input that is well-formed but not usable."""


class RunFailure(RuntimeError):
    """A run finished but some rows failed (e.g. no convergence)."""


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _tol(text):
    cid, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected ID=VALUE, got {text!r}")
    try:
        return cid.strip().upper(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value in {text!r}")


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="experiment config (YAML)")
    parser.add_argument("--out", default=d(None), help="output directory (also holds the run store)")
    parser.add_argument("--seed", type=_u64, default=d(None), help="override mc.seed")
    parser.add_argument("--threads", type=_positive_int, default=d(1), help="worker threads")
    parser.add_argument("--format", choices=("csv", "json"), default=d("csv"))


def build_parser():
    parser = argparse.ArgumentParser(prog="l2sp", description="L2-SP transfer ridge experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="VERB")

    sub.add_parser("simulate", parents=[common], help="Monte Carlo risks over the sweep")

    b = sub.add_parser("boundary", parents=[common], help="transfer-benefit verdicts")
    b.add_argument("--criterion", choices=BOUNDARY_CRITERIA, default="finite")

    sub.add_parser("optimize-source", parents=[common], help="transfer-optimal source penalty")

    f = sub.add_parser("fixed-point", parents=[common], help="fixed-point solver diagnostics")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--spectrum", metavar="FILE", help="whitespace-separated eigenvalues")
    src.add_argument("--isotropic", action="store_true", help="identity covariance")
    f.add_argument("--gamma", type=float, required=True)
    f.add_argument("--tau", type=float, nargs="+", required=True)

    v = sub.add_parser("validate", parents=[common], help="run the validation suite")
    v.add_argument("--preset", choices=sorted(validation.PRESETS), default="quick")
    v.add_argument("--only", help="comma-separated criterion IDs, e.g. C3,C5")
    v.add_argument("--tol", type=_tol, action="append", default=[], metavar="ID=VALUE",
                   help="override one tolerance (repeatable)")
    return parser


# ----------------------------------------------------------------------- helpers

def _config(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load(args.config)
    if args.seed is not None:
        cfg.seed = int(args.seed)
    return cfg


def _grid_columns(cfg):
    return ["grid_value", "grid_value_2"][:len(cfg.sweep)]


def _grid_cells(cfg, values):
    return dict(zip(_grid_columns(cfg), values))


def _points(cfg):
    """``(grid cells, params, TaskPair)`` for every sweep point."""
    out = []
    for values, params in cfg.grid():
        out.append((_grid_cells(cfg, values), params, build_task(params, cfg.task)))
    return out


def _design_groups(points):
    """Group points that can share replicate designs.

    Noise levels do not enter the integrated terms and source penalties are
    batched, so points differing only in ``sigma0``, ``sigma1`` or ``tau0``
    share one Monte Carlo pass.
    """
    groups = {}
    for idx, (_, params, _tp) in enumerate(points):
        key = tuple(params[k] for k in ("p", "n0", "n1", "w0_norm_sq", "rho", "w1_norm_sq", "tau1"))
        groups.setdefault(key, []).append(idx)
    return groups.values()


def _mc_terms(cfg, points, threads):
    """Per-point ``(R, 7)`` replicate term arrays."""
    terms = [None] * len(points)
    for idxs in _design_groups(points):
        params, tp = points[idxs[0]][1], points[idxs[0]][2]
        lam0s = [points[i][1]["n0"] * points[i][1]["tau0"] for i in idxs]
        lam1 = params["n1"] * params["tau1"]
        t = replicate_terms(tp, lam0s, lam1, cfg.replicates, cfg.seed, workers=threads)
        for j, i in enumerate(idxs):
            terms[i] = t[:, j]
    return terms


def _require_isotropic(cfg, what):
    if not cfg.isotropic:
        raise InputError(f"{what} needs identity covariances; the config sets explicit spectra")


def _emit(args, command, cfg, rows, columns, options, diagnostics=()):
    text = tables.render(rows, columns, args.format)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{command}.{args.format}")
        tables.write(path, text)
        record = RunRecord.create(command, cfg.to_dict() if cfg is not None else None, options,
                                  json.loads(tables.to_json(rows, columns)), diagnostics)
        rec_path = append_record(args.out, record)
        print(f"wrote {path}; run {record.run_id} -> {rec_path}", file=sys.stderr)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------- verbs

def cmd_simulate(args):
    cfg = _config(args)
    points = _points(cfg)
    terms = _mc_terms(cfg, points, args.threads)
    rows = []
    for (cells, params, tp), t in zip(points, terms):
        rep = summarize(t, params["sigma0"], params["sigma1"])
        rows.append({**cells, "scratch_risk": rep.scratch_risk, "transfer_risk": rep.transfer_risk,
                     "delta": rep.delta, "stderr": rep.mc_stderr, "B": rep.transfer_bias,
                     "V0_term": rep.transfer_var_source, "V1_term": rep.transfer_var_target,
                     "lambda0": params["n0"] * params["tau0"],
                     "lambda1": params["n1"] * params["tau1"]})
    cols = _grid_columns(cfg) + ["scratch_risk", "transfer_risk", "delta", "stderr", "B",
                                 "V0_term", "V1_term", "lambda0", "lambda1"]
    _emit(args, "simulate", cfg, rows, cols, {"seed": cfg.seed})
    return EXIT_OK


def _boundary_rows(cfg, criterion, threads):
    points = _points(cfg)
    if criterion in ("finite-isotropic", "asymptotic-isotropic"):
        _require_isotropic(cfg, f"criterion {criterion}")
    if criterion == "finite":
        verdicts = [boundary_from_terms(t, params["sigma0"])
                    for (_, params, _), t in zip(points, _mc_terms(cfg, points, threads))]
    elif criterion == "finite-isotropic":
        verdicts = [isotropic_ridgeless_boundary(params["w0_norm_sq"], params["rho"],
                                                 params["sigma0"], params["n0"], params["p"])
                    for _, params, _ in points]
    elif criterion == "asymptotic":
        verdicts = []
        for _, params, tp in points:
            lhs, rhs = asymptotic_sides(tp, params["tau0"], params["tau1"], params["gamma0"],
                                        params["p"] / params["n1"])
            verdicts.append(BoundaryVerdict.decide(lhs, rhs, Criterion.ASYMPTOTIC))
    else:
        verdicts = [isotropic_asymptotic_boundary(params["w0_norm_sq"], params["rho"],
                                                  params["sigma0"], params["gamma0"],
                                                  params["tau0"])
                    for _, params, _ in points]
    rows = [{**cells, "lhs": v.lhs, "rhs": v.rhs, "beneficial": v.transfer_beneficial,
             "stderr": v.stderr}
            for (cells, _, _), v in zip(points, verdicts)]
    return rows, _grid_columns(cfg) + ["lhs", "rhs", "beneficial", "stderr"]


def cmd_boundary(args):
    cfg = _config(args)
    rows, cols = _boundary_rows(cfg, args.criterion, args.threads)
    bad = [r for r in rows if not (math.isfinite(r["lhs"]) and math.isfinite(r["rhs"]))]
    if bad:
        raise RunFailure(f"{len(bad)} boundary rows are not finite")
    opts = {"criterion": args.criterion}
    if args.criterion == "finite":
        opts["seed"] = cfg.seed
    _emit(args, "boundary", cfg, rows, cols, opts)
    return EXIT_OK


def cmd_optimize_source(args):
    cfg = _config(args)
    _require_isotropic(cfg, "optimize-source")
    rows = []
    for values, params in cfg.grid():
        r = optimize_source(params["gamma0"], params["w0_norm_sq"], params["rho"],
                            params["sigma0"])
        rows.append({**_grid_cells(cfg, values), "a0_star": r.a0_star, "tau0_star": r.tau0_star,
                     "tau0_source_opt": r.tau0_source_opt, "sigma0_star": r.sigma0_star,
                     "regime": r.regime.value, "alignment": r.alignment_regime.value,
                     "clamped": r.clamped})
    cols = _grid_columns(cfg) + ["a0_star", "tau0_star", "tau0_source_opt", "sigma0_star",
                                 "regime", "alignment", "clamped"]
    _emit(args, "optimize-source", cfg, rows, cols, {})
    return EXIT_OK


def _read_spectrum(path):
    try:
        s = np.loadtxt(path, dtype=float, ndmin=1).ravel()
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read spectrum {path!r}: {exc}") from exc
    if s.size == 0 or not np.all(np.isfinite(s)) or np.any(s < 0):
        raise InputError(f"spectrum {path!r} must hold finite non-negative eigenvalues")
    return s


def cmd_fixed_point(args):
    eigs = np.ones(1) if args.isotropic else _read_spectrum(args.spectrum)
    rows, failed = [], 0
    for tau in args.tau:
        row = {"tau": tau}
        try:
            ctx = spectrum_context(eigs, args.gamma, tau)
            row.update(delta=ctx.delta, residual=ctx.residual, iterations=ctx.iterations,
                       converged=ctx.converged)
        except ConvergenceError as exc:
            log.error("tau=%g: %s", tau, exc)
            row.update(delta=float("nan"), residual=float("nan"), iterations=None,
                       converged=False)
        failed += not row["converged"]
        if args.isotropic:
            a = isotropic_a(tau, args.gamma)
            row.update(a0=a, abs_err=abs(row["delta"] - args.gamma * a))
        rows.append(row)
    cols = ["tau", "delta", "residual", "iterations", "converged"]
    if args.isotropic:
        cols += ["a0", "abs_err"]
    opts = {"gamma": args.gamma, "tau": list(args.tau),
            "spectrum": "isotropic" if args.isotropic else eigs.tolist()}
    _emit(args, "fixed-point", None, rows, cols, opts)
    if failed:
        raise RunFailure(f"{failed} fixed-point row(s) did not converge")
    return EXIT_OK


def cmd_validate(args):
    only = [c.strip().upper() for c in args.only.split(",")] if args.only else None
    unknown = set(only or ()) - set(validation.CRITERIA)
    tol = dict(args.tol)
    unknown |= set(tol) - set(validation.CRITERIA)
    if unknown:
        raise InputError(f"unknown criterion IDs {sorted(unknown)}")
    seed = 0 if args.seed is None else args.seed
    results = validation.run_suite(args.preset, seed=seed, out=args.out, workers=args.threads,
                                   only=only, tolerances=tol, echo=print)
    if args.format == "json" and not args.out:
        print(json.dumps([r.to_dict() for r in results], indent=1))
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed", file=sys.stderr)
    return EXIT_OK if n_fail == 0 else EXIT_RUNTIME


COMMANDS = {
    "simulate": cmd_simulate,
    "boundary": cmd_boundary,
    "optimize-source": cmd_optimize_source,
    "fixed-point": cmd_fixed_point,
    "validate": cmd_validate,
}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NoPositiveAlignmentError as exc:
        print(f"error: no positive-alignment optimum ({exc})", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, InputError, InfeasibleTaskError, LinalgInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, RunFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        # argument combinations the numerical layer rejects
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
