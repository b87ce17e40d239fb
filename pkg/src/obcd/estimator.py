"""scikit-learn style wrapper for sparse and nonnegative PCA."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .driver import SolverConfig, obcd_run
from .problems import (
    covariance,
    init_identity,
    init_nonneg_orthogonal,
    init_random_orthogonal,
    make_l0_spca,
    make_l1_spca,
    make_nn_pca,
    make_pca,
)
from .working_set import WssKind, WssStrategy


class OBCDSparsePCA(BaseEstimator, TransformerMixin):
    """Orthogonal sparse PCA by block coordinate descent.

    Finds loadings ``W`` with orthonormal columns minimizing
    ``-1/2 tr(W^T A^T A W) + alpha * penalty(W)``, where the penalty is the
    number of nonzeros (``'l0'``), the absolute sum (``'l1'``), a
    nonnegativity constraint (``'nonneg'``) or nothing (``'none'``). The
    data are not centered.

    Parameters
    ----------
    n_components : int
    penalty : {'l0', 'l1', 'nonneg', 'none'}
    alpha : float
        Penalty weight; ignored for ``'nonneg'`` and ``'none'``.
    wss : {'random', 'cyclic', 'sv', 'or'}
        How the pair of rows is chosen at each iteration.
    theta : float
        Proximal weight of the block update.
    max_iter : int
    init : {'identity', 'random', 'nonneg'} or None
        None uses ``'nonneg'`` for the nonnegative penalty and ``'random'``
        otherwise.
    random_state : int
    time_limit : float or None
        Wall-clock budget in seconds.

    Attributes
    ----------
    components_ : ndarray of shape (n_components, n_features)
    loadings_ : ndarray of shape (n_features, n_components)
    objective_ : float
    n_iter_ : int
    trace_ : list of TraceRecord
    """

    def __init__(self, n_components=2, penalty="l1", alpha=1.0, wss="or", theta=1e-5, max_iter=2000,
                 init=None, random_state=0, time_limit=None):
        self.n_components = n_components
        self.penalty = penalty
        self.alpha = alpha
        self.wss = wss
        self.theta = theta
        self.max_iter = max_iter
        self.init = init
        self.random_state = random_state
        self.time_limit = time_limit

    def _problem(self, C):
        r = self.n_components
        if self.penalty == "l0":
            return make_l0_spca(C, self.alpha, r)
        if self.penalty == "l1":
            return make_l1_spca(C, self.alpha, r)
        if self.penalty == "nonneg":
            return make_nn_pca(C, r)
        if self.penalty == "none":
            return make_pca(C, r)
        raise ValueError(f"unknown penalty {self.penalty!r}")

    def _start(self, n):
        init = self.init or ("nonneg" if self.penalty == "nonneg" else "random")
        if init == "identity":
            return init_identity(n, self.n_components)
        if init == "random":
            return init_random_orthogonal(n, self.n_components, self.random_state)
        if init == "nonneg":
            return init_nonneg_orthogonal(n, self.n_components, self.random_state)
        raise ValueError(f"unknown init {init!r}")

    def fit(self, X, y=None):
        A = check_array(X, dtype=np.float64, ensure_min_features=2)
        n = A.shape[1]
        if not 1 <= self.n_components <= n:
            raise ValueError(f"n_components must be in [1, {n}], got {self.n_components}")
        problem = self._problem(covariance(A))
        config = SolverConfig(
            theta_prox=self.theta,
            wss=WssStrategy(WssKind(self.wss)),
            max_iters=self.max_iter,
            time_limit=self.time_limit,
            seed=self.random_state,
        )
        W, trace = obcd_run(problem, config, self._start(n))
        self.loadings_ = W
        self.components_ = W.T.copy()
        self.objective_ = problem.eval_F(W)
        self.n_iter_ = len(trace)
        self.trace_ = trace
        self.n_features_in_ = n
        return self

    def transform(self, X):
        check_is_fitted(self, "loadings_")
        A = check_array(X, dtype=np.float64)
        if A.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {A.shape[1]} features, expected {self.n_features_in_}")
        return A @ self.loadings_
