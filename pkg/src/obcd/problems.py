"""Problem instances, starting points and data loading.

Every objective here has the form::

    f(X) = sign/2 <X, C X> + <E, X> + mu/4 rho(X)^T Cp rho(X) + const,
    rho(X) = diag(X X^T)

which covers sparse PCA (``sign = -1``), nonnegative PCA, the nonlinear
eigenvalue problem (``mu > 0``) and plain quadratics such as orthogonal
Procrustes. A two-row update changes ``C X`` by a rank-2 term and ``rho``
in two entries, so `ProblemState` keeps those products current in
``O(n r)`` per step.
"""

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import as_matrix, check_symmetric
from .exceptions import GradientCheckFailed, MalformedCsv, NotPSD
from .linalg import qr_orthonormalize
from .subproblem import QPolicy, RegularizerSpec

GRAD_PROBES = 20
GRAD_RTOL = 1e-5


class SolverMode(enum.Enum):
    EXACT = "exact"
    APPROX = "approx"


def power_iteration(C, iters=100, tol=1e-10, seed=0):
    """Spectral norm of a symmetric matrix by power iteration."""
    C = np.asarray(C, dtype=np.float64)
    if not np.any(C):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(C.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = C @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - est) <= tol * nw:
            est = nw
            break
        est = nw
    return float(est)


def pinv_psd(C, rcond=1e-10):
    """Pseudo-inverse of a symmetric matrix through its eigendecomposition."""
    C = check_symmetric(C, tol=1e-10)
    C = 0.5 * (C + C.T)
    evals, evecs = np.linalg.eigh(C)
    top = float(np.max(np.abs(evals), initial=0.0))
    keep = np.abs(evals) > rcond * top if top > 0 else np.zeros_like(evals, dtype=bool)
    inv = np.zeros_like(evals)
    inv[keep] = 1.0 / evals[keep]
    P = (evecs * inv) @ evecs.T
    return 0.5 * (P + P.T)


@dataclass(eq=False)
class NlepData:
    C: np.ndarray
    E: np.ndarray
    lam: float
    C_pinv: Optional[np.ndarray] = None

    def __post_init__(self):
        self.C = check_symmetric(self.C, tol=1e-12)
        self.E = as_matrix(self.E, "E")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.C.shape[0] != self.E.shape[0]:
            raise ValueError(f"C is {self.C.shape} but E has {self.E.shape[0]} rows")
        evals = np.linalg.eigvalsh(0.5 * (self.C + self.C.T))
        if evals.size and evals[0] < -1e-8:
            raise NotPSD(f"C has eigenvalue {evals[0]:.3e}")
        if self.C_pinv is None:
            self.C_pinv = pinv_psd(self.C)


class ProblemState:
    """Iterate together with the cached products ``C X``, ``rho`` and ``Cp rho``."""

    def __init__(self, problem, X):
        self.problem = problem
        self.X = np.array(X, dtype=np.float64, copy=True)
        self.refresh()

    def refresh(self):
        p = self.problem
        self.CX = p.C @ self.X
        if p.mu:
            self.rho = np.einsum("ij,ij->i", self.X, self.X)
            self.Crho = p.C_pinv @ self.rho
        self.F = p.eval_F(self.X)

    def grad_rows(self, B):
        p = self.problem
        idx = list(B)
        G = p.sign * self.CX[idx] + p.E[idx]
        if p.mu:
            G = G + p.mu * self.Crho[idx, None] * self.X[idx]
        return G

    def grad(self):
        p = self.problem
        G = p.sign * self.CX + p.E
        if p.mu:
            G = G + p.mu * self.Crho[:, None] * self.X
        return G

    def scoring_subgradient(self):
        G = self.grad()
        if self.problem.reg.kind.value == "l1":
            G = G + self.problem.reg.subgradient(self.X)
        return G

    def delta_f(self, B, Ms):
        """``f(X+) - f(X)`` for a stack of 2x2 matrices `Ms` acting on rows `B`."""
        p = self.problem
        idx = list(B)
        XB = self.X[idx]
        Ms = np.asarray(Ms, dtype=np.float64).reshape(-1, 2, 2)
        XBp = Ms @ XB  # (m, 2, r)
        D = XBp - XB
        CBB = p.C[np.ix_(idx, idx)]
        quad = np.einsum("mbr,br->m", D, self.CX[idx]) + 0.5 * np.einsum("bc,mbr,mcr->m", CBB, D, D)
        out = p.sign * quad + np.einsum("mbr,br->m", D, p.E[idx])
        if p.mu:
            drho = np.einsum("mbr,mbr->mb", XBp, XBp) - self.rho[idx]
            PBB = p.C_pinv[np.ix_(idx, idx)]
            out = out + 0.25 * p.mu * (2.0 * drho @ self.Crho[idx] + np.einsum("bc,mb,mc->m", PBB, drho, drho))
        return out

    def delta_h(self, B, Ms):
        idx = list(B)
        XBp = np.asarray(Ms).reshape(-1, 2, 2) @ self.X[idx]
        reg = self.problem.reg
        return reg(XBp.reshape(XBp.shape[0], -1), axis=1) - reg(self.X[idx])

    def apply(self, B, M):
        """Replace rows `B` by ``M @ X[B]`` and update the caches."""
        p = self.problem
        idx = list(B)
        XB = self.X[idx]
        XBp = M @ XB
        D = XBp - XB
        self.X[idx] = XBp
        self.CX += p.C[:, idx] @ D
        if p.mu:
            new = np.einsum("br,br->b", XBp, XBp)
            drho = new - self.rho[idx]
            self.rho[idx] = new
            self.Crho += p.C_pinv[:, idx] @ drho


@dataclass(eq=False)
class ProblemInstance:
    name: str
    C: np.ndarray
    E: np.ndarray
    r: int
    sign: float = 1.0
    mu: float = 0.0
    C_pinv: Optional[np.ndarray] = None
    const: float = 0.0
    reg: RegularizerSpec = field(default_factory=RegularizerSpec.zero)
    q_policy: QPolicy = field(default_factory=QPolicy.zero)
    L_f: float = 0.0
    solver_mode: SolverMode = SolverMode.EXACT
    trig_degree: Optional[int] = None

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def dims(self):
        return self.n, self.r

    @property
    def h_spec(self):
        return self.reg

    def eval_f(self, X):
        X = np.asarray(X, dtype=np.float64)
        val = 0.5 * self.sign * float(np.sum(X * (self.C @ X))) + float(np.sum(self.E * X)) + self.const
        if self.mu:
            rho = np.einsum("ij,ij->i", X, X)
            val += 0.25 * self.mu * float(rho @ self.C_pinv @ rho)
        return val

    def eval_grad_f(self, X):
        X = np.asarray(X, dtype=np.float64)
        G = self.sign * (self.C @ X) + self.E
        if self.mu:
            rho = np.einsum("ij,ij->i", X, X)
            G = G + self.mu * (self.C_pinv @ rho)[:, None] * X
        return G

    def eval_h(self, X):
        return float(self.reg(X))

    def eval_F(self, X):
        return self.eval_f(X) + self.eval_h(X)

    def scoring_subgradient(self, X):
        return self.eval_grad_f(X) + self.reg.subgradient(np.asarray(X, dtype=np.float64))

    def state(self, X):
        return ProblemState(self, X)

    def check_gradient(self, probes=GRAD_PROBES, rtol=GRAD_RTOL, seed=0):
        """Compare directional derivatives with central differences.

        Returns the largest ``||rho||`` seen at the probes.
        """
        rng = np.random.default_rng(seed)
        rho_max = 0.0
        for _ in range(probes):
            X = qr_orthonormalize(rng.standard_normal((self.n, self.r)))
            D = rng.standard_normal(X.shape)
            D /= np.linalg.norm(D)
            h = 1e-5
            fd = (self.eval_f(X + h * D) - self.eval_f(X - h * D)) / (2 * h)
            an = float(np.sum(self.eval_grad_f(X) * D))
            scale = max(1.0, abs(an), abs(self.eval_f(X)))
            if abs(fd - an) > rtol * scale:
                raise GradientCheckFailed(f"{self.name}: directional derivative {an:.6e} vs finite difference {fd:.6e}")
            rho_max = max(rho_max, float(np.linalg.norm(np.einsum("ij,ij->i", X, X))))
        return rho_max


def _check_r(n, r):
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")


def _spca(name, C, r, reg, curvature):
    C = check_symmetric(C)
    C = 0.5 * (C + C.T)
    n = C.shape[0]
    _check_r(n, r)
    L = power_iteration(C)
    if curvature == "zero":
        policy = QPolicy.zero()
    elif curvature == "diagonal":
        policy = QPolicy.diagonal(L)
    elif curvature == "exact":
        # the true Hessian -I kron C: the block model is f itself, so block
        # stationary points that are not block minimizers can be left
        policy = QPolicy.kronecker(np.eye(r), -C)
    else:
        raise ValueError(f"unknown curvature policy {curvature!r}")
    prob = ProblemInstance(name, C, np.zeros((n, r)), r, sign=-1.0, reg=reg, q_policy=policy, L_f=L)
    prob.check_gradient()
    return prob


def make_l0_spca(C, lam, r, curvature="zero"):
    """``min -1/2 tr(X^T C X) + lam ||X||_0`` over St(n, r)."""
    return _spca("l0pca", C, r, RegularizerSpec.l0(lam), curvature)


def make_l1_spca(C, lam, r, curvature="zero"):
    """``min -1/2 tr(X^T C X) + lam ||X||_1`` over St(n, r)."""
    return _spca("l1pca", C, r, RegularizerSpec.l1(lam), curvature)


def make_nn_pca(C, r, curvature="zero"):
    """``min -1/2 tr(X^T C X)`` over nonnegative points of St(n, r)."""
    return _spca("nnpca", C, r, RegularizerSpec.nonneg(), curvature)


def make_pca(C, r, curvature="zero"):
    """Smooth PCA, ``min -1/2 tr(X^T C X)``."""
    return _spca("pca", C, r, RegularizerSpec.zero(), curvature)


def make_nlep(data, r, L_f=None):
    """``min 1/2 <X, C X> + <E, X> + lam/4 rho^T C^+ rho``, solved in approximate mode."""
    n = data.C.shape[0]
    _check_r(n, r)
    if data.E.shape != (n, r):
        raise ValueError(f"E must be {(n, r)}, got {data.E.shape}")
    prob = ProblemInstance(
        "nlep", data.C, data.E, r, sign=1.0, mu=float(data.lam), C_pinv=data.C_pinv,
        solver_mode=SolverMode.APPROX, trig_degree=4,
    )
    rho_max = prob.check_gradient()
    if L_f is None:
        L_f = power_iteration(data.C) + data.lam * power_iteration(data.C_pinv) * rho_max
    prob.L_f = float(L_f)
    return prob


def make_quadratic(C, E, r, const=0.0, reg=None, name="quadratic"):
    """``min 1/2 <X, C X> + <E, X> + const`` with exact curvature ``I kron C``.

    `C` must be positive semidefinite so that the block model is a valid
    upper bound. Orthogonal Procrustes ``||X - T||_F^2`` is
    ``C = 2 I``, ``E = -2 T``, ``const = ||T||_F^2``.
    """
    C = check_symmetric(C)
    C = 0.5 * (C + C.T)
    n = C.shape[0]
    _check_r(n, r)
    evals = np.linalg.eigvalsh(C)
    if evals[0] < -1e-8 * max(1.0, abs(evals[-1])):
        raise NotPSD(f"C has eigenvalue {evals[0]:.3e}")
    E = as_matrix(E, "E")
    if E.shape != (n, r):
        raise ValueError(f"E must be {(n, r)}, got {E.shape}")
    prob = ProblemInstance(
        name, C, E, r, sign=1.0, const=float(const), reg=reg or RegularizerSpec.zero(),
        q_policy=QPolicy.kronecker(np.eye(r), C), L_f=float(max(evals[-1], 0.0)),
    )
    prob.check_gradient()
    return prob


def init_identity(n, r):
    """First `r` columns of the n-by-n identity."""
    _check_r(n, r)
    return np.eye(n, r)


def init_random_orthogonal(n, r, seed):
    """Orthonormalized Gaussian matrix; deterministic per seed."""
    _check_r(n, r)
    rng = np.random.default_rng(seed)
    return qr_orthonormalize(rng.standard_normal((n, r)))


def init_nonneg_orthogonal(n, r, seed):
    """Nonnegative orthonormal start from a random partition of the rows.

    Rows are split into `r` nonempty groups uniformly at random; column `i`
    is ``1/sqrt(|G_i|)`` on group ``G_i`` and zero elsewhere.
    """
    _check_r(n, r)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    labels = np.empty(n, dtype=np.intp)
    labels[perm[:r]] = np.arange(r)
    labels[perm[r:]] = rng.integers(0, r, size=n - r)
    X = np.zeros((n, r))
    for i in range(r):
        members = labels == i
        X[members, i] = 1.0 / math.sqrt(members.sum())
    return X


def load_csv(path):
    """Read a headerless rectangular numeric CSV into a float64 array."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not tok.strip() for tok in row):
                continue
            try:
                vals = [float(tok) for tok in row]
            except ValueError:
                raise MalformedCsv(f"non-numeric entry in {row!r}", row=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedCsv("non-finite entry", row=lineno)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise MalformedCsv(f"expected {width} columns, found {len(vals)}", row=lineno)
            rows.append(vals)
    if not rows:
        raise MalformedCsv("file contains no data")
    return np.array(rows, dtype=np.float64)


def gen_randn(m, n, seed):
    """Standard Gaussian m-by-n data matrix."""
    return np.random.default_rng(seed).standard_normal((m, n))


def covariance(A):
    """``A^T A`` (uncentered), exactly symmetric."""
    A = as_matrix(A, "A")
    C = A.T @ A
    return 0.5 * (C + C.T)
