"""Exact and approximate solvers for the two-row subproblem.

With two rows ``B = (i, j)`` selected, the block update ``V`` is a 2x2
orthogonal matrix parameterized by one angle on one of two branches. On a
branch, the majorized objective is::

    q(c, s) = a c + b s + w c^2 + d c s + e + h'(c x + s y),   c^2 + s^2 = 1

`bsm_solve` minimizes it globally by enumerating breakpoints (kinks of
``h'``, stationary points of the smooth part, feasibility bounds and the
two poles ``c = 0``). `fim_solve` finds a critical point of a smooth
trigonometric polynomial with a fifth-order upper model.
"""

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import (
    DegeneratePolynomial,
    EmptyModel,
    InfeasibleSubproblem,
    NotTrigPolynomial,
)
from .linalg import Branch, PlanarOrthogonal, wrap_angle
from .quartic import real_roots

FEAS_TOL = 1e-12
# entries at most this large in magnitude count as zero for the l0 penalty;
# kinks computed from tan-values leave rounding residue of this order
ZERO_TOL = 1e-12
# relative size below which a y-entry is treated as exactly zero
_Y_ZERO = 1e-14


class RegKind(enum.Enum):
    ZERO = "zero"
    L0 = "l0"
    L1 = "l1"
    NONNEG = "nonneg"


@dataclass(frozen=True)
class RegularizerSpec:
    """Row-separable nonsmooth term ``h``."""

    kind: RegKind = RegKind.ZERO
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RegKind(self.kind))
        if self.lam < 0:
            raise ValueError("regularization weight must be nonnegative")

    @classmethod
    def zero(cls):
        return cls(RegKind.ZERO)

    @classmethod
    def l0(cls, lam):
        return cls(RegKind.L0, float(lam))

    @classmethod
    def l1(cls, lam):
        return cls(RegKind.L1, float(lam))

    @classmethod
    def nonneg(cls):
        return cls(RegKind.NONNEG)

    def __call__(self, V, axis=None):
        """Evaluate ``h`` on an array (summed over `axis`, all entries by default).

        The nonnegativity indicator returns ``inf`` for entries below
        ``-1e-12``.
        """
        V = np.asarray(V, dtype=np.float64)
        if self.kind is RegKind.ZERO:
            return np.sum(np.zeros_like(V), axis=axis)
        if self.kind is RegKind.L0:
            return self.lam * np.sum(np.abs(V) > ZERO_TOL, axis=axis)
        if self.kind is RegKind.L1:
            return self.lam * np.sum(np.abs(V), axis=axis)
        bad = np.any(V < -FEAS_TOL, axis=axis)
        return np.where(bad, np.inf, 0.0) if axis is not None else (np.inf if bad else 0.0)

    def subgradient(self, X):
        """Designated element of the subdifferential used for pair scoring."""
        if self.kind is RegKind.L1:
            return self.lam * np.where(X >= 0.0, 1.0, -1.0)
        return np.zeros_like(X)


class QKind(enum.Enum):
    ZERO_CURVATURE = "zero"
    DIAGONAL = "diagonal"
    KRONECKER = "kronecker"


@dataclass(frozen=True, eq=False)
class QPolicy:
    """How the 4x4 curvature matrix ``Q`` of the block model is built."""

    kind: QKind = QKind.ZERO_CURVATURE
    sigma: float = 0.0
    H1: Optional[np.ndarray] = None
    H2: Optional[np.ndarray] = None

    @classmethod
    def zero(cls):
        return cls(QKind.ZERO_CURVATURE)

    @classmethod
    def diagonal(cls, sigma):
        return cls(QKind.DIAGONAL, sigma=float(sigma))

    @classmethod
    def kronecker(cls, H1, H2):
        return cls(QKind.KRONECKER, H1=np.asarray(H1, float), H2=np.asarray(H2, float))


@dataclass
class SubproblemCoeffs:
    a: float
    b: float
    d: float
    w: float
    e_const: float
    x: np.ndarray
    y: np.ndarray
    branch: Branch = Branch.ROTATION


class Breakpoints(NamedTuple):
    t: list
    feasible: bool = True


def assemble_pqz(grad_f, X, B, policy, theta_prox):
    """Build the block model ``(P, Q, Z)`` for rows ``B`` of `X`.

    ``P = [grad_f X^T]_BB - mat(Q vec(I)) - theta I``; ``Q`` is ``None``
    under zero curvature.
    """
    i, j = B
    G_B = np.asarray(grad_f)[[i, j]]
    Z = np.asarray(X)[[i, j]]
    return assemble_block(G_B, Z, B, policy, theta_prox)


def assemble_block(G_B, Z, B, policy, theta_prox):
    M = G_B @ Z.T
    if policy.kind is QKind.ZERO_CURVATURE:
        return M - theta_prox * np.eye(2), None, Z
    if policy.kind is QKind.DIAGONAL:
        Q = policy.sigma * np.eye(4)
    else:
        idx = list(B)
        Q1 = Z @ policy.H1 @ Z.T
        Q2 = policy.H2[np.ix_(idx, idx)]
        Q = np.kron(Q1, Q2)
    QI = (Q @ np.eye(2).reshape(-1, order="F")).reshape(2, 2, order="F")
    return M - QI - theta_prox * np.eye(2), Q, Z


def branch_coefficients(P, Q, Z, branch):
    """Map ``(P, Q, Z)`` to the scalar coefficients of one branch.

    With ``V = [[+-c, s], [-+s, c]]`` (upper sign: rotation) and
    ``vec`` taken column-major.
    """
    branch = Branch(branch)
    sg = 1.0 if branch is Branch.ROTATION else -1.0
    P = np.asarray(P, dtype=np.float64)
    a = P[1, 1] + sg * P[0, 0]
    b = P[0, 1] - sg * P[1, 0]
    if Q is None:
        cq = e = d = 0.0
    else:
        Q = 0.5 * (np.asarray(Q) + np.asarray(Q).T)
        cq = 0.5 * (Q[0, 0] + Q[3, 3]) + sg * Q[0, 3]
        e = 0.5 * (Q[1, 1] + Q[2, 2]) - sg * Q[1, 2]
        d = -Q[0, 1] + sg * Q[0, 2] - sg * Q[1, 3] + Q[2, 3]
    Z = np.asarray(Z, dtype=np.float64)
    x = np.concatenate([sg * Z[0], Z[1]])
    y = np.concatenate([Z[1], -sg * Z[0]])
    return SubproblemCoeffs(float(a), float(b), float(d), float(cq - e), float(e), x, y, branch)


def eval_reduced_objective(c, s, coeffs, reg):
    """Exact value of the reduced objective at ``(cos, sin) = (c, s)``."""
    return float(_eval_many(np.array([c]), np.array([s]), coeffs, reg)[0])


def _eval_many(cs, ss, k, reg):
    smooth = k.a * cs + k.b * ss + k.w * cs * cs + k.d * cs * ss + k.e_const
    if reg.kind is RegKind.ZERO:
        return smooth
    v = cs[:, None] * k.x[None, :] + ss[:, None] * k.y[None, :]
    return smooth + reg(v, axis=1)


def _stationary_ts(A, B, w, d):
    """tan-values where ``A c + B s + w c^2 + d c s`` is stationary.

    From ``(d - 2 w t - d t^2)^2 = (B - A t)^2 (1 + t^2)``; squaring admits
    spurious roots, which the caller's exact evaluation discards.
    """
    if w == 0.0 and d == 0.0:
        # the quartic is -(B - A t)^2 (1 + t^2): one double root
        return [B / A] if A != 0.0 else []
    coeffs = (
        d * d - A * A,
        4.0 * d * w + 2.0 * A * B,
        4.0 * w * w - 2.0 * d * d - A * A - B * B,
        -4.0 * d * w + 2.0 * A * B,
        d * d - B * B,
    )
    try:
        return real_roots(coeffs)
    except DegeneratePolynomial:
        return []


def _split_y(x, y):
    scale = max(float(np.max(np.abs(x), initial=0.0)), float(np.max(np.abs(y), initial=0.0)), 1e-300)
    live = np.abs(y) > _Y_ZERO * scale
    return live


def enumerate_breakpoints(coeffs, reg, sign_case):
    """Candidate tan-values for one branch and one sign case.

    ``sign_case=+1`` covers ``cos > 0`` via ``(c, s) = (1, t) / sqrt(1 + t^2)``;
    ``-1`` covers ``cos < 0`` via ``(c, s) = -(1, t) / sqrt(1 + t^2)``.
    The poles ``cos = 0`` are not representable and are handled by
    `bsm_solve`.
    """
    sign = 1.0 if sign_case in (1, "+", "plus") else -1.0
    k = coeffs
    x, y = k.x, k.y
    n_entries = x.size
    live = _split_y(x, y)
    kinks = list(-x[live] / y[live])

    if reg.kind is RegKind.ZERO:
        ts = _stationary_ts(k.a, k.b, k.w, k.d)
        assert len(ts) <= 4
        return Breakpoints(ts)

    if reg.kind is RegKind.L0:
        ts = kinks + _stationary_ts(k.a, k.b, k.w, k.d)
        assert len(ts) <= n_entries + 4
        return Breakpoints(ts)

    if reg.kind is RegKind.L1:
        lam = reg.lam
        z = np.unique(np.concatenate([kinks, -np.asarray(kinks)])) if kinks else np.empty(0)
        if z.size:
            mids = np.concatenate([[z[0] - 1.0], 0.5 * (z[:-1] + z[1:]), [z[-1] + 1.0]])
        else:
            mids = np.array([0.0])
        ts = list(kinks)
        for m in mids:
            o = np.sign(x + m * y)
            A = k.a + sign * lam * float(o @ x)
            B = k.b + sign * lam * float(o @ y)
            ts += _stationary_ts(A, B, k.w, k.d)
        assert len(ts) <= n_entries + (2 * n_entries + 1) * 4
        return Breakpoints(ts)

    # nonnegativity: sign * (x + t y) >= 0
    xs, ys = sign * x, sign * y
    if np.any(xs[~live] < -FEAS_TOL):
        return Breakpoints([], feasible=False)
    xl, yl = xs[live], ys[live]
    pos, neg = yl > 0, yl < 0
    lb = float(np.max(-xl[pos] / yl[pos])) if np.any(pos) else -math.inf
    ub = float(np.min(-xl[neg] / yl[neg])) if np.any(neg) else math.inf
    if lb > ub:
        return Breakpoints([], feasible=False)
    ts = [min(ub, max(t, lb)) for t in _stationary_ts(k.a, k.b, k.w, k.d)]
    ts += [t for t in (lb, ub) if math.isfinite(t)]
    assert len(ts) <= 6
    return Breakpoints(ts)


def _branch_candidates(k, reg):
    """Candidate ``(cos, sin)`` arrays for one branch; index 2 is ``(1, 0)``."""
    cs, ss = [0.0, 0.0, 1.0], [1.0, -1.0, 0.0]  # poles, then the identity angle
    if reg.kind is RegKind.ZERO and k.w == 0.0 and k.d == 0.0:
        # a c + b s alone: minimized in closed form
        rho = math.hypot(k.a, k.b)
        if rho > 0.0:
            cs.append(-k.a / rho)
            ss.append(-k.b / rho)
        return np.array(cs), np.array(ss)
    for sign in (1.0, -1.0):
        for t in enumerate_breakpoints(k, reg, sign).t:
            h = math.hypot(1.0, t)
            cs.append(sign / h)
            ss.append(sign * t / h)
    return np.array(cs), np.array(ss)


def bsm_solve(coeffs_rot, coeffs_ref, reg):
    """Globally minimize the reduced objective over both branches.

    Either coefficient set may be ``None`` to exclude that branch.

    Returns
    -------
    V : PlanarOrthogonal
    q_value : float
        Objective value at `V`, including the constant ``e``.

    Raises
    ------
    InfeasibleSubproblem
        Under nonnegativity, when no candidate on any branch is feasible.
    """
    best = None
    identity_value = None
    for rank, k in enumerate((coeffs_rot, coeffs_ref)):
        if k is None:
            continue
        cs, ss = _branch_candidates(k, reg)
        vals = _eval_many(cs, ss, k, reg)
        if k.branch is Branch.ROTATION:
            identity_value = float(vals[2])
        angles = np.arctan2(ss, cs)
        order = np.lexsort((angles, np.abs(angles), vals))
        m = order[0]
        cand = (float(vals[m]), rank, abs(float(angles[m])), float(angles[m]), k.branch)
        if best is None or cand[:4] < best[:4]:
            best = cand
    if best is None:
        raise ValueError("at least one branch must be searched")
    if not math.isfinite(best[0]):
        raise InfeasibleSubproblem("no feasible planar update for this block")
    value = best[0]
    if identity_value is not None and identity_value <= value + 4 * np.finfo(float).eps * (1.0 + abs(value)):
        return PlanarOrthogonal(Branch.ROTATION, 0.0), identity_value
    return PlanarOrthogonal(best[4], best[3]), value


# ---------------------------------------------------------------------------
# trigonometric polynomials and the fifth-order iterative method


class TrigPoly:
    """``p(phi) = sum_m alpha[m] cos(m phi) + beta[m] sin(m phi)``."""

    def __init__(self, alpha, beta=None):
        self.alpha = np.asarray(alpha, dtype=np.float64).ravel()
        if beta is None:
            beta = np.zeros_like(self.alpha)
        self.beta = np.asarray(beta, dtype=np.float64).ravel()
        if self.alpha.shape != self.beta.shape:
            raise ValueError("alpha and beta must have the same length")
        self._m = np.arange(self.alpha.size, dtype=np.float64)

    @property
    def degree(self):
        return self.alpha.size - 1

    def __len__(self):
        return self.alpha.size

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=np.float64)
        mp = np.multiply.outer(phi, self._m)
        out = np.cos(mp) @ self.alpha + np.sin(mp) @ self.beta
        return float(out) if out.ndim == 0 else out

    def derivatives(self, phi, order=4):
        """``[p(phi), p'(phi), ..., p^(order)(phi)]``."""
        m = self._m
        c, s = np.cos(m * phi), np.sin(m * phi)
        out = []
        mk = np.ones_like(m)
        # d^k/dphi^k cos(m phi) cycles through cos, -sin, -cos, sin
        for k in range(order + 1):
            kc = (c, -s, -c, s)[k % 4]
            ks = (s, c, -s, -c)[k % 4]
            out.append(float(mk @ (self.alpha * kc + self.beta * ks)))
            mk = mk * m
        return out

    def fifth_derivative_bound(self):
        return float(np.sum(self._m**5 * np.hypot(self.alpha, self.beta)))

    def shifted(self, const=0.0, cos1=0.0):
        alpha = self.alpha.copy()
        if alpha.size < 2 and cos1 != 0.0:
            alpha = np.concatenate([alpha, np.zeros(2 - alpha.size)])
        beta = np.concatenate([self.beta, np.zeros(alpha.size - self.beta.size)])
        alpha[0] += const
        if cos1 != 0.0:
            alpha[1] += cos1
        return TrigPoly(alpha, beta)


def fit_harmonics(p_evaluator, max_degree, vectorized=False):
    """Recover the Fourier coefficients of a trigonometric polynomial.

    `p_evaluator` is sampled at ``4 * max_degree`` equispaced angles; the
    fit is then checked at 101 off-grid angles.

    Raises
    ------
    NotTrigPolynomial
        If the off-grid residual exceeds ``1e-9 * (1 + max|p|)``.
    """
    M = int(max_degree)
    N = 4 * max(M, 1)
    grid = 2.0 * np.pi * np.arange(N) / N

    def evaluate(phis):
        if vectorized:
            return np.asarray(p_evaluator(phis), dtype=np.float64)
        return np.array([p_evaluator(float(t)) for t in phis])

    vals = evaluate(grid)
    m = np.arange(M + 1)
    cosm = np.cos(np.outer(m, grid))
    sinm = np.sin(np.outer(m, grid))
    alpha = (2.0 / N) * cosm @ vals
    beta = (2.0 / N) * sinm @ vals
    alpha[0] *= 0.5
    beta[0] = 0.0
    poly = TrigPoly(alpha, beta)

    probes = 2.0 * np.pi * (np.arange(101) + 0.5 * (1.0 + 1.0 / np.sqrt(5.0))) / 101.0
    truth = evaluate(probes)
    resid = float(np.max(np.abs(poly(probes) - truth)))
    scale = 1.0 + max(float(np.max(np.abs(truth))), float(np.max(np.abs(vals))))
    if resid > 1e-9 * scale:
        raise NotTrigPolynomial(f"degree-{M} fit leaves residual {resid:.3e}")
    return poly


def _model_step(g, pbar):
    """Minimize ``sum_i g[i] d^i / i! + pbar |d|^5 / 120`` over ``d``."""

    def model(dl):
        return g[0] + dl * (g[1] + dl * (g[2] / 2 + dl * (g[3] / 6 + dl * g[4] / 24))) + pbar * abs(dl) ** 5 / 120

    best_d, best_v = 0.0, model(0.0)
    for side in (1.0, -1.0):
        try:
            roots = real_roots((side * pbar / 24.0, g[4] / 6.0, g[3] / 2.0, g[2], g[1]))
        except DegeneratePolynomial:
            continue
        for dl in roots:
            if side * dl < 0.0:
                continue
            v = model(dl)
            if v < best_v or (v == best_v and abs(dl) < abs(best_d)):
                best_d, best_v = dl, v
    return best_d


def _fim_descend(poly, phi0, max_iter=50, tol=1e-12):
    pbar = poly.fifth_derivative_bound()
    phi = phi0
    val = poly(phi)
    if pbar == 0.0:
        return phi, val
    for _ in range(max_iter):
        dl = _model_step(poly.derivatives(phi), pbar)
        new_val = poly(phi + dl)
        if new_val > val:
            break
        phi, val = phi + dl, new_val
        if abs(dl) <= tol:
            break
    return phi, val


FIM_STARTS = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)


def fim_solve(p_harmonics, theta_prox, starts=FIM_STARTS, max_iter=50, tol=1e-12):
    """Find a critical point of ``K(V) = p(V) + theta/2 ||V - I||_F^2``.

    Parameters
    ----------
    p_harmonics : TrigPoly or dict
        Either a single polynomial (rotation branch only) or a mapping
        ``{Branch: TrigPoly}``.
    theta_prox : float
    starts : sequence of float
        Starting angles; every branch is descended from each.

    Returns
    -------
    V : PlanarOrthogonal
    K_value : float
        Never larger than ``K(I) = p_rotation(0)``.
    """
    if isinstance(p_harmonics, TrigPoly):
        p_harmonics = {Branch.ROTATION: p_harmonics}
    if not p_harmonics or any(len(p) == 0 for p in p_harmonics.values()):
        raise EmptyModel("no harmonics supplied")

    best = None
    for branch in (Branch.ROTATION, Branch.REFLECTION):
        if branch not in p_harmonics:
            continue
        p = p_harmonics[branch]
        if branch is Branch.ROTATION:
            # ||R(phi) - I||^2 = 4 - 4 cos(phi)
            K = p.shifted(const=2.0 * theta_prox, cos1=-2.0 * theta_prox)
        else:
            K = p.shifted(const=2.0 * theta_prox)
        for phi0 in starts:
            phi, val = _fim_descend(K, phi0, max_iter=max_iter, tol=tol)
            phi = wrap_angle(phi)
            cand = (val, branch is Branch.REFLECTION, abs(phi), phi, branch)
            if best is None or cand[:4] < best[:4]:
                best = cand
    if best is None:
        raise EmptyModel("no branch to search")
    return PlanarOrthogonal(best[4], best[3]), best[0]
