"""Command-line interface: ``obcd solve``, ``obcd decompose`` and ``obcd check``.

Exit codes: 0 success, 2 bad flags, 3 bad data, 4 solver failure.
"""

import argparse
import json
import math
import sys

import numpy as np

from .driver import SolverConfig, obcd_run, stationarity_measure
from .exceptions import InfeasibleStart, InfeasibleSubproblem, MalformedCsv, NotOrthogonal, OBCDError
from .linalg import compose_planar, gram_residual, jacobi_givens_decompose
from .problems import (
    NlepData,
    SolverMode,
    covariance,
    gen_randn,
    init_identity,
    init_nonneg_orthogonal,
    init_random_orthogonal,
    load_csv,
    make_l0_spca,
    make_l1_spca,
    make_nlep,
    make_nn_pca,
)
from .working_set import WssKind, WssStrategy

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

NEEDS_LAMBDA = ("l0pca", "l1pca", "nlep")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _randn_dims(text):
    try:
        m, n = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected M,N") from None
    if m < 1 or n < 1:
        raise argparse.ArgumentTypeError("M and N must be positive")
    return m, n


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _add_problem_args(p):
    p.add_argument("--problem", required=True, choices=["l0pca", "l1pca", "nnpca", "nlep"])
    p.add_argument("--lambda", dest="lam", type=float, help="regularization weight (l0pca, l1pca, nlep)")
    p.add_argument("--r", type=_positive_int, required=True, help="number of columns")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV data matrix A (rows are samples); C = A^T A")
    src.add_argument("--randn", type=_randn_dims, metavar="M,N", help="use an M-by-N Gaussian data matrix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--E", dest="E_path", help="CSV linear term for nlep (default zero)")


def build_parser():
    parser = _Parser(prog="obcd", description="Block coordinate descent on the Stiefel manifold.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run the solver and write a JSON-lines trace")
    _add_problem_args(s)
    s.set_defaults(parser=s)
    s.add_argument("--wss", choices=[k.value for k in WssKind], default="random")
    s.add_argument("--mode", choices=["exact", "approx"], help="defaults to the problem's natural mode")
    s.add_argument("--theta", type=float, default=1e-5)
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--init", choices=["identity", "randorth", "nonneg"], default="identity")
    s.add_argument("--out", required=True, help="trace path, '-' for stdout")

    d = sub.add_parser("decompose", help="factor an orthogonal matrix into planar rotations")
    d.add_argument("matrix", help="CSV file with an n-by-n orthogonal matrix")
    d.add_argument("--out", default="-", help="factor CSV path, '-' for stdout")
    d.add_argument("--verify", action="store_true", help="print the reconstruction error")

    c = sub.add_parser("check", help="stationarity diagnostics at a given point")
    _add_problem_args(c)
    c.set_defaults(parser=c)
    c.add_argument("--X", dest="X_path", required=True, help="CSV file with the n-by-r point")
    c.add_argument("--theta", type=float, default=1e-5)
    c.add_argument("--sample", type=_positive_int, default=200)
    c.add_argument("--full", action="store_true", help="average over every pair of rows")
    return parser


def _load_problem(args):
    if args.problem in NEEDS_LAMBDA and args.lam is None:
        args.parser.error(f"--lambda is required for --problem {args.problem}")
    A = load_csv(args.data) if args.data else gen_randn(*args.randn, seed=args.seed)
    C = covariance(A)
    n = C.shape[0]
    if args.r > n:
        raise ValueError(f"--r {args.r} exceeds the data dimension {n}")
    if args.problem == "l0pca":
        return make_l0_spca(C, args.lam, args.r)
    if args.problem == "l1pca":
        return make_l1_spca(C, args.lam, args.r)
    if args.problem == "nnpca":
        return make_nn_pca(C, args.r)
    E = load_csv(args.E_path) if args.E_path else np.zeros((n, args.r))
    return make_nlep(NlepData(C, E, args.lam), args.r)


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w")


def cmd_solve(args):
    problem = _load_problem(args)
    n, r = problem.dims
    if args.init == "identity":
        X0 = init_identity(n, r)
    elif args.init == "randorth":
        X0 = init_random_orthogonal(n, r, args.seed)
    else:
        X0 = init_nonneg_orthogonal(n, r, args.seed)
    config = SolverConfig(
        theta_prox=args.theta,
        wss=WssStrategy(WssKind(args.wss)),
        mode=SolverMode(args.mode) if args.mode else None,
        max_iters=args.max_iters,
        time_limit=args.time_limit,
        seed=args.seed,
    )
    F0 = problem.eval_F(X0)
    X, trace = obcd_run(problem, config, X0)
    stat = stationarity_measure(problem, X, config.stationarity_sample, np.random.default_rng(args.seed), args.theta, mode=config.mode)
    out = _open_out(args.out)
    try:
        for rec in trace:
            row = {
                "iter": rec.iter, "elapsed_s": rec.elapsed, "F": rec.F, "block_i": rec.block.i,
                "block_j": rec.block.j, "step_norm": rec.step_norm, "feas": rec.feas,
            }
            if rec.score is not None:
                row["score"] = rec.score
            out.write(json.dumps(row) + "\n")
        summary = {
            "summary": True, "F_initial": F0, "F_final": problem.eval_F(X), "iters": len(trace),
            "stationarity_estimate": stat,
        }
        out.write(json.dumps(summary) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_decompose(args):
    D = load_csv(args.matrix)
    factors = jacobi_givens_decompose(D)
    out = _open_out(args.out)
    try:
        for B, V in factors:
            out.write(f"{B.i},{B.j},{V.branch.value},{V.angle!r}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if args.verify:
        err = float(np.linalg.norm(compose_planar(D.shape[0], factors) - D))
        print(f"reconstruction error: {err:.3e}", file=sys.stderr if args.out == "-" else sys.stdout)
    return 0


def cmd_check(args):
    problem = _load_problem(args)
    X = load_csv(args.X_path)
    if X.shape != problem.dims:
        raise ValueError(f"X has shape {X.shape}, problem expects {problem.dims}")
    stat = stationarity_measure(problem, X, args.sample, np.random.default_rng(args.seed), args.theta, full=args.full)
    print(f"stationarity: {stat:.6e}")
    print(f"gram_residual: {gram_residual(X):.6e}")
    return 0


COMMANDS = {"solve": cmd_solve, "decompose": cmd_decompose, "check": cmd_check}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleStart, InfeasibleSubproblem) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (MalformedCsv, NotOrthogonal, OSError, OBCDError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
