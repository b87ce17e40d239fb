"""Dense matrix primitives for optimization on the Stiefel manifold.

A point on St(n, r) is stored as a plain ``(n, r)`` float64 array. The
solver only ever touches two rows at a time through a 2x2 orthogonal
matrix, which is either a Givens rotation or a Jacobi reflection::

    R(phi) = [[ cos, sin],      F(phi) = [[-cos, sin],
              [-sin, cos]]                [ sin, cos]]
"""

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import as_matrix
from .exceptions import NotOrthogonal, RankDeficient


class Branch(enum.Enum):
    ROTATION = "rotation"
    REFLECTION = "reflection"


class WorkingSet(NamedTuple):
    """Pair of row indices ``i < j`` updated in one iteration."""

    i: int
    j: int


def wrap_angle(phi):
    """Map an angle to the half-open interval (-pi, pi]."""
    phi = math.remainder(float(phi), 2.0 * math.pi)
    if phi <= -math.pi:
        phi += 2.0 * math.pi
    return phi + 0.0  # drop negative zero


@dataclass(frozen=True)
class PlanarOrthogonal:
    branch: Branch
    angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        object.__setattr__(self, "angle", wrap_angle(self.angle))

    @classmethod
    def from_cos_sin(cls, branch, c, s):
        return cls(branch, math.atan2(s, c))

    def matrix(self):
        c, s = math.cos(self.angle), math.sin(self.angle)
        if self.branch is Branch.ROTATION:
            return np.array([[c, s], [-s, c]])
        return np.array([[-c, s], [s, c]])

    @property
    def det(self):
        return 1.0 if self.branch is Branch.ROTATION else -1.0

    def step_norm(self):
        """Frobenius distance ``||M - I||_F`` to the identity."""
        if self.branch is Branch.ROTATION:
            # ||R - I||^2 = 4 - 4 cos = 8 sin^2(phi / 2)
            return 2.0 * math.sqrt(2.0) * abs(math.sin(0.5 * self.angle))
        return 2.0

    def transpose(self):
        if self.branch is Branch.ROTATION:
            return PlanarOrthogonal(Branch.ROTATION, -self.angle)
        return self  # reflections are symmetric

    @property
    def is_identity(self):
        return self.branch is Branch.ROTATION and self.angle == 0.0


IDENTITY = PlanarOrthogonal(Branch.ROTATION, 0.0)


def gram_residual(X):
    """Return ``||X^T X - I_r||_F``."""
    X = np.asarray(X, dtype=np.float64)
    r = X.shape[1]
    return float(np.linalg.norm(X.T @ X - np.eye(r)))


def qr_orthonormalize(M, rank_tol=1e-12):
    """Orthonormalize the columns of `M` by thin QR.

    The sign of each column is fixed so that the R factor has a
    nonnegative diagonal, which makes the result a deterministic function
    of `M`.

    Raises
    ------
    RankDeficient
        If `M` does not have full column rank.
    """
    M = as_matrix(M, "M")
    n, r = M.shape
    if n < r:
        raise RankDeficient(f"need n >= r, got shape {M.shape}")
    Q, R = np.linalg.qr(M, mode="reduced")
    d = np.diag(R)
    scale = max(float(np.max(np.abs(M))), np.finfo(float).tiny) if M.size else 1.0
    if np.any(np.abs(d) <= rank_tol * scale * max(n, 1)):
        raise RankDeficient("input matrix does not have full column rank")
    signs = np.where(d < 0, -1.0, 1.0)
    return Q * signs


def apply_planar_update(X, B, V):
    """Return a copy of `X` with rows ``B = (i, j)`` replaced by ``M(V) @ X[B]``."""
    Xp = np.array(X, dtype=np.float64, copy=True)
    apply_planar_update_inplace(Xp, B, V)
    return Xp


def apply_planar_update_inplace(X, B, V):
    i, j = B
    M = V.matrix() if isinstance(V, PlanarOrthogonal) else np.asarray(V)
    xi = X[i].copy()
    xj = X[j]
    X[i] = M[0, 0] * xi + M[0, 1] * xj
    X[j] = M[1, 0] * xi + M[1, 1] * xj
    return X


def planar_minimizer(a, b):
    """Minimize ``a cos(phi) + b sin(phi)``; return ``(value, cos, sin)``."""
    rho = math.hypot(a, b)
    if rho == 0.0:
        return 0.0, 1.0, 0.0
    return -rho, -a / rho, -b / rho


def nearest_orthogonal_2x2(P):
    """Minimize ``<V, P>`` over all 2x2 orthogonal `V`.

    Both branches are searched in closed form. Ties go to the rotation
    branch, so ``P = 0`` returns the identity.

    Returns
    -------
    V : PlanarOrthogonal
    value : float
    """
    P = np.asarray(P, dtype=np.float64)
    # <R(phi), P> = cos (P11 + P22) + sin (P12 - P21)
    rot = planar_minimizer(P[0, 0] + P[1, 1], P[0, 1] - P[1, 0])
    # <F(phi), P> = cos (P22 - P11) + sin (P12 + P21)
    ref = planar_minimizer(P[1, 1] - P[0, 0], P[0, 1] + P[1, 0])
    if ref[0] < rot[0]:
        return PlanarOrthogonal.from_cos_sin(Branch.REFLECTION, ref[1], ref[2]), ref[0]
    return PlanarOrthogonal.from_cos_sin(Branch.ROTATION, rot[1], rot[2]), rot[0]


def kron_small(A, B):
    """Kronecker product, ``(A kron B)[i*p + k, j*q + l] = A[i, j] * B[k, l]``."""
    return np.kron(np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64))


def embed_planar(n, B, V):
    """Dense n-by-n matrix acting as `V` on rows `B` and as identity elsewhere."""
    W = np.eye(n)
    i, j = B
    M = V.matrix()
    W[np.ix_([i, j], [i, j])] = M
    return W


def jacobi_givens_decompose(D, tol=1e-8):
    """Factor an orthogonal matrix into ``n(n-1)/2`` planar factors.

    Returns ``[(B_1, V_1), ..., (B_N, V_N)]`` such that
    ``D = W_N ... W_2 W_1`` where ``W_k = embed_planar(n, B_k, V_k)``.
    Pairs are visited column by column (Givens QR order). Every factor is a
    rotation except possibly the one on the trailing 2x2 block, which is a
    reflection exactly when ``det(D) = -1``.

    Raises
    ------
    NotOrthogonal
        If `D` is not square or ``||D^T D - I||_F > tol``.
    """
    D = as_matrix(D, "D")
    n = D.shape[0]
    if D.shape != (n, n):
        raise NotOrthogonal(f"matrix must be square, got shape {D.shape}")
    if n < 2:
        raise NotOrthogonal("need n >= 2 to factor into planar blocks")
    if gram_residual(D) > tol:
        raise NotOrthogonal(f"gram residual {gram_residual(D):.3e} exceeds {tol:g}")

    A = D.copy()
    steps = []
    for col in range(n - 1):
        for row in range(col + 1, n):
            B = WorkingSet(col, row)
            if (col, row) == (n - 2, n - 1):
                # A = diag(I, T) with T orthogonal; undo T exactly.
                T = A[n - 2:, n - 2:]
                if T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0] < 0.0:
                    # T = F(phi) with T[1] = [sin, cos]
                    G = PlanarOrthogonal(Branch.REFLECTION, math.atan2(T[1, 0], T[1, 1]))
                else:
                    # T = R(phi): T^T = R(-phi)
                    G = PlanarOrthogonal(Branch.ROTATION, -math.atan2(T[0, 1], T[0, 0]))
            else:
                u, v = A[col, col], A[row, col]
                G = PlanarOrthogonal(Branch.ROTATION, math.atan2(v, u) if v != 0.0 or u < 0.0 else 0.0)
            apply_planar_update_inplace(A, B, G)
            steps.append((B, G))
    # G_N ... G_1 D = I  =>  D = G_1^T ... G_N^T
    return [(B, G.transpose()) for B, G in reversed(steps)]


def compose_planar(n, factors):
    """Multiply out ``W_N ... W_1`` for a factor list from `jacobi_givens_decompose`."""
    D = np.eye(n)
    for B, V in factors:
        apply_planar_update_inplace(D, B, V)
    return D
