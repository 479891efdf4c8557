"""Benchmark command line: convergence, stability, and precision studies.

Subcommands:
  converge   error vs step size for one or more methods, with fitted slopes
  stability  descending step-size scan reporting the largest stable step
  precision  error vs wall time and work counters
  run        a single integration, printing final-state info and counters

Results go to CSV (--out); progress lines go to stderr.  Exit codes:
0 success, 1 any solver failure or reference failure, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import sys

from . import bench, problems
from .bench import (OUTCOME_OK, OUTCOME_SOLVER_FAIL, ReferenceError,
                    ReferencePolicy, emit_csv)
from .integrators import (BlowUpError, IntegratorConfig, IntegratorKind,
                          integrate)
from .krylov import ConvergenceError, GmresConfig, KrylovConfig
from .sparse_ops import max_norm

_DEFAULT_T_END = {"parabolic": 1.0, "allencahn": 0.075, "schnakenberg": 0.1}


def _make_problem(args):
    if args.problem == "parabolic":
        return problems.make_semilinear_parabolic(args.grid or 200)
    if args.problem == "allencahn":
        return problems.make_allen_cahn(eps=args.eps, n=args.grid or 64)
    return problems.make_schnakenberg(gamma=args.gamma, n=args.grid or 64)


def _t_end(args):
    return args.t_end if args.t_end is not None else _DEFAULT_T_END[args.problem]


def _solver_cfgs(args, label):
    restart = args.gmres_restart or (20 if label == "schnakenberg" else 10)
    gmres = GmresConfig(tol=args.gmres_tol, restart=restart, max_iters=500)
    krylov = KrylovConfig(tol=args.krylov_tol)
    return gmres, krylov


def _methods(args):
    try:
        return [IntegratorKind(m) for m in args.method]
    except ValueError as exc:
        _arg_error(str(exc))


def _arg_error(msg):
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(2)


def _add_common(p):
    p.add_argument("--problem", required=True,
                   choices=["parabolic", "allencahn", "schnakenberg"])
    p.add_argument("--method", action="append", default=None,
                   help="integrator, repeatable: "
                        + ", ".join(k.value for k in IntegratorKind))
    p.add_argument("--grid", type=int, default=None,
                   help="grid points per axis (parabolic: interior nodes)")
    p.add_argument("--gamma", type=float, default=1000.0)
    p.add_argument("--eps", type=float, default=0.02)
    p.add_argument("--t-end", dest="t_end", type=float, default=None)
    p.add_argument("--precond", choices=["on", "off", "both"], default="off")
    p.add_argument("--gmres-tol", type=float, default=1e-12)
    p.add_argument("--gmres-restart", type=int, default=None)
    p.add_argument("--krylov-tol", type=float, default=1e-12)
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--seed", type=int, default=0,
                   help="reserved; studies are deterministic")


def _build_parser():
    parser = argparse.ArgumentParser(prog="imexp-bench",
                                     description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="convergence order study")
    _add_common(p)
    p.add_argument("--h1", type=float, required=True, help="coarsest step")
    p.add_argument("--halvings", type=int, default=4)

    p = sub.add_parser("stability", help="largest-stable-step scan")
    _add_common(p)
    p.add_argument("--h-grid", required=True,
                   help="comma-separated descending step sizes")

    p = sub.add_parser("precision", help="work/time vs error study")
    _add_common(p)
    p.add_argument("--h-grid", required=True,
                   help="comma-separated step sizes")

    p = sub.add_parser("run", help="single integration")
    _add_common(p)
    p.add_argument("--h", type=float, required=True)
    return parser


def _cmd_converge(args):
    sys_ = _make_problem(args)
    gmres, krylov = _solver_cfgs(args, sys_.label)
    methods = _methods(args)
    records, slopes = bench.run_convergence_study(
        sys_, methods, h1=args.h1, n_halvings=args.halvings,
        t_end=_t_end(args), gmres=gmres, krylov=krylov,
        precond=args.precond == "on")
    for name, slope in slopes.items():
        print(f"{name}: fitted slope {slope:.3f}")
    if args.out:
        emit_csv(records, args.out)
    return 1 if any(r.outcome == OUTCOME_SOLVER_FAIL for r in records) else 0


def _cmd_stability(args):
    sys_ = _make_problem(args)
    gmres, krylov = _solver_cfgs(args, sys_.label)
    methods = _methods(args)
    h_grid = [float(tok) for tok in args.h_grid.split(",")]
    status = 0
    all_records = []
    for method in methods:
        largest, records = bench.run_stability_scan(
            sys_, method, h_grid, t_end=_t_end(args), gmres=gmres,
            krylov=krylov, precond=args.precond == "on")
        all_records.extend(records)
        if largest is None:
            print(f"{method.value}: none stable")
        else:
            print(f"{method.value}: largest stable h = {largest:g}")
        if any(r.outcome == OUTCOME_SOLVER_FAIL for r in records):
            status = 1
    if args.out:
        emit_csv(all_records, args.out)
    return status


def _cmd_precision(args):
    sys_ = _make_problem(args)
    gmres, krylov = _solver_cfgs(args, sys_.label)
    methods = _methods(args)
    h_grid = [float(tok) for tok in args.h_grid.split(",")]
    flags = {"on": (True,), "off": (False,), "both": (False, True)}[args.precond]
    records = bench.run_precision_study(
        sys_, methods, h_grid, precond_flags=flags, t_end=_t_end(args),
        gmres=gmres, krylov=krylov)
    for r in records:
        err = "unstable" if r.outcome != OUTCOME_OK else f"{r.error_max_norm:.3e}"
        print(f"{r.method} h={r.h:g}: error {err}, work {r.total_work}, "
              f"wall {r.wall_seconds:.2f}s")
    if args.out:
        emit_csv(records, args.out)
    return 1 if any(r.outcome == OUTCOME_SOLVER_FAIL for r in records) else 0


def _cmd_run(args):
    sys_ = _make_problem(args)
    gmres, krylov = _solver_cfgs(args, sys_.label)
    (method,) = _methods(args)
    cfg = IntegratorConfig(kind=method, h=args.h, t_end=_t_end(args),
                           gmres=gmres, krylov=krylov,
                           use_preconditioner=args.precond == "on")
    try:
        u, stats = integrate(sys_, cfg, sys_.u0)
    except BlowUpError as exc:
        print(f"unstable: {exc}")
        return 0
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    print(f"final max-norm {max_norm(u):.6e} after {stats.steps} steps")
    print(f"work: spmv {stats.spmv_count}, gmres iters "
          f"{stats.gmres_iters_total}, krylov matvecs "
          f"{stats.krylov_matvecs_total}, N evals {stats.n_evals}, "
          f"wall {stats.wall_time:.2f}s")
    if sys_.exact is not None:
        print(f"error vs exact: {max_norm(u - sys_.exact(cfg.t_end)):.6e}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.method is None:
        args.method = ["imexprk2"]
    try:
        handler = {"converge": _cmd_converge, "stability": _cmd_stability,
                   "precision": _cmd_precision, "run": _cmd_run}[args.command]
        return handler(args)
    except ReferenceError as exc:
        print(f"reference failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError,) as exc:
        _arg_error(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
