"""Input validation helpers shared by the solver and the estimator."""

import numpy as np

from .exceptions import NotOrthogonal, NotSymmetric


def as_matrix(A, name="array", copy=False):
    """Return `A` as a finite 2-D float64 array."""
    A = np.array(A, dtype=np.float64, copy=copy) if copy else np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf")
    return A


def check_symmetric(C, tol=1e-10, name="C"):
    C = as_matrix(C, name)
    if C.shape[0] != C.shape[1]:
        raise NotSymmetric(f"{name} must be square, got shape {C.shape}")
    scale = max(1.0, float(np.max(np.abs(C)))) if C.size else 1.0
    if np.max(np.abs(C - C.T), initial=0.0) > tol * scale:
        raise NotSymmetric(f"{name} is not symmetric within {tol:g}")
    return C


def check_stiefel(X, tol=1e-8, name="X"):
    """Validate that `X` is n-by-r with orthonormal columns, n >= r >= 1."""
    X = as_matrix(X, name)
    n, r = X.shape
    if not n >= r >= 1:
        raise NotOrthogonal(f"{name} must satisfy n >= r >= 1, got shape {X.shape}")
    res = np.linalg.norm(X.T @ X - np.eye(r))
    if res > tol:
        raise NotOrthogonal(f"{name} is not orthonormal: gram residual {res:.3e} > {tol:g}")
    return X
