"""The outer block coordinate descent loop.

Each iteration picks a pair of rows, solves the two-row subproblem and
applies the resulting 2x2 orthogonal matrix to those rows, so every iterate
stays on the Stiefel manifold up to rounding. In exact mode the
subproblem is solved globally by breakpoint search; in approximate mode the
one-dimensional objective is fitted as a trigonometric polynomial and a
critical point is found that is no worse than the identity.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._validation import check_stiefel
from .exceptions import InfeasibleStart, NotOrthogonal
from .linalg import IDENTITY, Branch, PlanarOrthogonal, WorkingSet, gram_residual, qr_orthonormalize
from .problems import SolverMode
from .subproblem import (
    FEAS_TOL,
    RegKind,
    assemble_block,
    branch_coefficients,
    bsm_solve,
    fim_solve,
    fit_harmonics,
)
from .working_set import (
    WssKind,
    WssStrategy,
    all_pairs,
    n_pairs,
    or_scores,
    sample_pairs,
    select_cyclic,
    select_random,
    sv_scores,
    unrank_pair,
    unrank_pairs,
    _argmax_abs,
)

NULL_STEP = 1e-12
REFRESH_EVERY = 1000
BOTH_BRANCHES = (Branch.ROTATION, Branch.REFLECTION)


@dataclass
class SolverConfig:
    theta_prox: float = 1e-5
    wss: WssStrategy = field(default_factory=WssStrategy)
    # None follows the problem's declared mode
    mode: Optional[SolverMode] = None
    max_iters: int = 1000
    time_limit: Optional[float] = None
    seed: int = 0
    stationarity_tol: float = 1e-10
    stationarity_sample: int = 200
    reorth_threshold: float = 1e-8
    branches: tuple = BOTH_BRANCHES
    # consecutive null steps before stopping; None picks a default per strategy
    null_window: Optional[int] = None

    def __post_init__(self):
        if not self.theta_prox > 0:
            raise ValueError("theta_prox must be positive")
        if isinstance(self.wss, (str, WssKind)):
            self.wss = WssStrategy(WssKind(self.wss))
        if self.mode is not None:
            self.mode = SolverMode(self.mode)
        self.branches = tuple(Branch(b) for b in self.branches)
        if not self.branches:
            raise ValueError("at least one branch is required")


class TraceRecord(NamedTuple):
    iter: int
    elapsed: float
    F: float
    block: WorkingSet
    step_norm: float
    feas: float
    score: Optional[float] = None


def _planar_stack(branch, phis):
    c, s = np.cos(phis), np.sin(phis)
    M = np.empty((np.size(phis), 2, 2))
    if branch is Branch.ROTATION:
        M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1] = c, s, -s, c
    else:
        M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1] = -c, s, s, c
    return M


def solve_block_exact(state, B, theta_prox, branches=BOTH_BRANCHES):
    """Global minimizer of the block model; returns ``(V, model_value)``."""
    p = state.problem
    P, Q, Z = assemble_block(state.grad_rows(B), state.X[list(B)], B, p.q_policy, theta_prox)
    rot = branch_coefficients(P, Q, Z, Branch.ROTATION) if Branch.ROTATION in branches else None
    ref = branch_coefficients(P, Q, Z, Branch.REFLECTION) if Branch.REFLECTION in branches else None
    return bsm_solve(rot, ref, p.reg)


def block_harmonics(state, B, branches=BOTH_BRANCHES):
    """Fourier coefficients of ``phi -> f(X+) - f(X)`` on each branch."""
    degree = state.problem.trig_degree
    out = {}
    for br in branches:
        out[br] = fit_harmonics(lambda phis, br=br: state.delta_f(B, _planar_stack(br, phis)), degree, vectorized=True)
    return out


def solve_block_approx(state, B, theta_prox, branches=BOTH_BRANCHES, starts=None):
    """Critical point of ``K(V) = f(X+) - f(X) + theta/2 ||V - I||^2``."""
    harm = block_harmonics(state, B, branches)
    if starts is None:
        return fim_solve(harm, theta_prox)
    return fim_solve(harm, theta_prox, starts=starts)


def _check_start(problem, X0):
    try:
        X0 = check_stiefel(X0, tol=1e-8, name="X0")
    except NotOrthogonal as exc:
        raise InfeasibleStart(str(exc)) from None
    except ValueError as exc:
        raise InfeasibleStart(str(exc)) from None
    if X0.shape != problem.dims:
        raise InfeasibleStart(f"X0 has shape {X0.shape}, problem expects {problem.dims}")
    if problem.reg.kind is RegKind.NONNEG and np.any(X0 < -FEAS_TOL):
        raise InfeasibleStart("X0 has negative entries under a nonnegativity constraint")
    return X0


def obcd_run(problem, config, X0, callback=None):
    """Run block coordinate descent from `X0`.

    Parameters
    ----------
    problem : ProblemInstance
    config : SolverConfig
    X0 : (n, r) array with orthonormal columns
    callback : callable, optional
        Called as ``callback(record, X)`` after every iteration; returning
        ``True`` stops the run.

    Returns
    -------
    X : ndarray
    trace : list of TraceRecord
    """
    X0 = _check_start(problem, X0)
    mode = config.mode or problem.solver_mode
    if mode is SolverMode.APPROX:
        if problem.trig_degree is None:
            raise ValueError("approximate mode needs a problem with a declared trig_degree")
        if problem.reg.kind is not RegKind.ZERO:
            raise ValueError("approximate mode supports smooth objectives only")
    n = problem.n
    if n < 2:
        raise InfeasibleStart("need at least two rows")

    wss = config.wss
    theta = config.theta_prox
    sample = wss.resolved_sample_size(n)
    if config.null_window is not None:
        window = config.null_window
    elif wss.kind is WssKind.CYCLIC:
        window = n_pairs(n)
    else:
        window = 5 * sample
    rng = np.random.default_rng(config.seed)
    full = all_pairs(n) if wss.greedy and wss.full_scan else None
    cursor = 0

    state = problem.state(X0)
    F = state.F
    trace = []
    null_run = 0
    null_pairs = set()
    t0 = time.perf_counter()
    for it in range(config.max_iters):
        if config.time_limit is not None and time.perf_counter() - t0 >= config.time_limit:
            break
        score = None
        if wss.kind is WssKind.RANDOM:
            B = select_random(n, rng)
        elif wss.kind is WssKind.CYCLIC:
            B, cursor = select_cyclic(n, cursor)
        else:
            cand = full if full is not None else sample_pairs(n, sample, rng)
            if null_pairs:
                # pairs already solved to the identity at this X would be
                # solved to the identity again
                codes = np.fromiter(null_pairs, dtype=np.int64, count=len(null_pairs))
                cand = cand[~np.isin(cand[:, 0] * n + cand[:, 1], codes)]
                if len(cand) == 0:
                    if len(null_pairs) >= n_pairs(n):
                        break  # every block is stationary
                    cand = _fresh_pair(n, null_pairs, rng)
            G = state.scoring_subgradient()
            if wss.kind is WssKind.GREEDY_SV:
                scores = sv_scores(state.X, G, cand)
            else:
                scores = or_scores(state.X, G, problem.L_f, theta, cand)
            B, score = _argmax_abs(cand, scores)

        if mode is SolverMode.EXACT:
            V, _ = solve_block_exact(state, B, theta, config.branches)
        else:
            V, _ = solve_block_approx(state, B, theta, config.branches)

        step = 0.0
        if not V.is_identity:
            M = V.matrix()
            dF = float(state.delta_f(B, M)[0])
            if problem.reg.kind is not RegKind.ZERO:
                dF += float(state.delta_h(B, M)[0])
            step = V.step_norm()
            if mode is SolverMode.APPROX and dF + 0.5 * theta * step * step > 0.0:
                # rounding in the fit can leave a step that is worse than
                # staying put; the identity is always admissible
                step = 0.0
            else:
                state.apply(B, M)
                F += dF

        feas = gram_residual(state.X)
        if feas > config.reorth_threshold:
            state.X = qr_orthonormalize(state.X)
            state.refresh()
            F = state.F
            feas = gram_residual(state.X)
        elif (it + 1) % REFRESH_EVERY == 0:
            state.refresh()
            F = state.F

        rec = TraceRecord(it, time.perf_counter() - t0, F, B, step, feas, score)
        trace.append(rec)
        if callback is not None and callback(rec, state.X):
            break
        if step < NULL_STEP:
            null_run += 1
            if wss.greedy:
                null_pairs.add(B.i * n + B.j)
                if len(null_pairs) >= n_pairs(n):
                    break
        else:
            null_run = 0
            null_pairs.clear()
        if null_run >= window:
            break
    return state.X.copy(), trace


def _fresh_pair(n, exclude, rng):
    """One uniformly drawn pair whose code ``i * n + j`` is not in `exclude`."""
    free = [k for k in range(n_pairs(n)) if _code(n, k) not in exclude]
    return unrank_pairs(n, [free[int(rng.integers(len(free)))]])


def _code(n, k):
    i, j = unrank_pair(n, k)
    return i * n + j


def verify_sufficient_decrease(trace, theta_prox, F0=None, tol=1e-9):
    """Check ``theta/2 ||V - I||^2 <= F_t - F_{t+1} + tol`` along a trace.

    `F0` is the objective at the start point; without it the first record
    only serves as the reference for the second.
    """
    prev = F0
    for rec in trace:
        if prev is not None and 0.5 * theta_prox * rec.step_norm**2 > prev - rec.F + tol:
            return False
        prev = rec.F
    return True


def stationarity_measure(problem, X, sample_size=200, rng=None, theta_prox=1e-5, full=False, mode=None):
    """Average ``||I - V_B||_F^2`` over blocks, where ``V_B`` solves the block problem at `X`.

    Blocks are `sample_size` pairs drawn uniformly, or every pair when
    `full` is set. In approximate mode the critical point is the one
    reached from the identity on the rotation branch.
    """
    X = check_stiefel(X, tol=1e-6)
    n = problem.n
    if rng is None:
        rng = np.random.default_rng(0)
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    pairs = all_pairs(n) if full else sample_pairs(n, sample_size, rng)
    if len(pairs) == 0:
        return 0.0
    mode = SolverMode(mode) if mode is not None else problem.solver_mode
    state = problem.state(X)
    total = 0.0
    for i, j in pairs:
        B = WorkingSet(int(i), int(j))
        if mode is SolverMode.EXACT:
            V, _ = solve_block_exact(state, B, theta_prox)
        else:
            V, _ = solve_block_approx(state, B, theta_prox, branches=(Branch.ROTATION,), starts=(0.0,))
        total += V.step_norm() ** 2
    return total / len(pairs)
