"""Choosing which pair of rows to update.

Pairs are indexed lexicographically: ``(0, 1), (0, 2), ..., (n-2, n-1)``.
The greedy rules score a pair from the 2x2 block of an ``n x n`` matrix
built from ``X`` and a (sub)gradient ``G``, but only the needed entries are
ever formed, at ``O(r)`` per pair.
"""

import enum
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import TooFewRows
from .linalg import WorkingSet


class WssKind(enum.Enum):
    RANDOM = "random"
    CYCLIC = "cyclic"
    GREEDY_SV = "sv"
    GREEDY_OR = "or"


@dataclass(frozen=True)
class WssStrategy:
    kind: WssKind = WssKind.RANDOM
    # pairs scored per greedy iteration; None means min(n, 200)
    sample_size: Optional[int] = None
    # score every pair instead of a sample (small n only)
    full_scan: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", WssKind(self.kind))
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")

    @property
    def greedy(self):
        return self.kind in (WssKind.GREEDY_SV, WssKind.GREEDY_OR)

    def resolved_sample_size(self, n):
        return self.sample_size if self.sample_size is not None else min(n, 200)


class ScorePair(NamedTuple):
    pair: WorkingSet
    score: float


def n_pairs(n):
    return n * (n - 1) // 2


def unrank_pair(n, k):
    """The `k`-th pair of ``range(n)`` in lexicographic order."""
    k = int(k)
    # row i owns indices [off(i), off(i) + n - 1 - i)
    i = int(n - 2 - math.floor(math.sqrt(-8 * k + 4 * n * (n - 1) - 7) / 2.0 - 0.5))
    off = i * (2 * n - i - 1) // 2
    # guard the float estimate
    while off > k:
        i -= 1
        off = i * (2 * n - i - 1) // 2
    while off + (n - 1 - i) <= k:
        off += n - 1 - i
        i += 1
    return WorkingSet(i, i + 1 + k - off)


def unrank_pairs(n, ks):
    """Vectorized `unrank_pair`; returns an ``(m, 2)`` integer array."""
    ks = np.asarray(ks, dtype=np.int64)
    i = (n - 2 - np.floor(np.sqrt(-8.0 * ks + 4.0 * n * (n - 1) - 7.0) / 2.0 - 0.5)).astype(np.int64)
    i = np.clip(i, 0, n - 2)
    off = i * (2 * n - i - 1) // 2
    # one correction step either way absorbs float error in the estimate
    low = off > ks
    i[low] -= 1
    off = i * (2 * n - i - 1) // 2
    high = off + (n - 1 - i) <= ks
    off[high] += n - 1 - i[high]
    i[high] += 1
    return np.stack([i, i + 1 + ks - off], axis=1)


def all_pairs(n):
    """Every pair in lexicographic order, as an ``(m, 2)`` integer array."""
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    return np.array(list(itertools.combinations(range(n), 2)), dtype=np.int64)


def select_random(n, rng):
    """Uniform random pair; `rng` is a ``numpy.random.Generator``."""
    if n < 2:
        raise TooFewRows(f"need at least 2 rows, got {n}")
    return unrank_pair(n, rng.integers(n_pairs(n)))


def select_cyclic(n, cursor):
    """Pair at position ``cursor mod C(n, 2)`` and the next cursor."""
    if n < 2:
        raise TooFewRows(f"need at least 2 rows, got {n}")
    m = n_pairs(n)
    cursor %= m
    return unrank_pair(n, cursor), (cursor + 1) % m


def sample_pairs(n, size, rng):
    """`size` distinct pairs drawn uniformly, in lexicographic order."""
    if n < 2:
        raise TooFewRows(f"need at least 2 rows, got {n}")
    m = n_pairs(n)
    if size >= m:
        return all_pairs(n)
    ks = np.sort(rng.choice(m, size=size, replace=False))
    return unrank_pairs(n, ks)


def _pair_arrays(candidates):
    idx = np.asarray(candidates, dtype=np.intp).reshape(-1, 2)
    return idx[:, 0], idx[:, 1]


def _argmax_abs(candidates, scores):
    idx = np.asarray(candidates, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((idx[:, 1], idx[:, 0]))
    # argmax returns the first maximizer, i.e. the lexicographically smallest
    m = order[int(np.argmax(np.abs(np.asarray(scores)[order])))]
    return ScorePair(WorkingSet(int(idx[m, 0]), int(idx[m, 1])), float(scores[m]))


def sv_scores(X, G, candidates):
    """``S_ij = X_i . G_j - G_i . X_j`` for each candidate pair."""
    I, J = _pair_arrays(candidates)
    return np.einsum("kr,kr->k", X[I], G[J]) - np.einsum("kr,kr->k", G[I], X[J])


def score_sv(X, G, candidates):
    """Pair with the largest stationarity violation ``|S_ij|``."""
    if len(candidates) == 0:
        raise ValueError("no candidate pairs")
    return _argmax_abs(candidates, sv_scores(X, G, candidates))


def or_scores(X, G, L_f, theta_prox, candidates):
    """Guaranteed block decrease ``min_V <V - I, T_BB>`` for each pair.

    ``T = (G - L_f X) X^T - theta I``; the minimum over both branches is
    ``min(-c1 - hypot(c1, c2), -c1 - hypot(c3, c4))`` where for a pair
    ``(i, j)``: ``c1 = T_ii + T_jj``, ``c2 = T_ij - T_ji``,
    ``c3 = T_jj - T_ii``, ``c4 = T_ij + T_ji``.
    """
    I, J = _pair_arrays(candidates)
    D = G - L_f * X

    def t(a, b):
        return np.einsum("kr,kr->k", D[a], X[b])

    Tii = t(I, I) - theta_prox
    Tjj = t(J, J) - theta_prox
    Tij = t(I, J)
    Tji = t(J, I)
    c1 = Tii + Tjj
    w1 = -c1 - np.hypot(c1, Tij - Tji)
    w2 = -c1 - np.hypot(Tjj - Tii, Tij + Tji)
    return np.minimum(w1, w2)


def or_score_block(T_BB):
    """Closed-form ``min_V <V - I, T_BB>`` over 2x2 orthogonal `V`."""
    T = np.asarray(T_BB, dtype=np.float64)
    c1 = T[0, 0] + T[1, 1]
    w1 = -c1 - math.hypot(c1, T[0, 1] - T[1, 0])
    w2 = -c1 - math.hypot(T[1, 1] - T[0, 0], T[0, 1] + T[1, 0])
    return min(w1, w2)


def score_or(X, G, L_f, theta_prox, candidates):
    """Pair with the largest guaranteed decrease (most negative score)."""
    if len(candidates) == 0:
        raise ValueError("no candidate pairs")
    return _argmax_abs(candidates, or_scores(X, G, L_f, theta_prox, candidates))


def sv_matrix(X, G):
    """Dense skew matrix ``X G^T - G X^T`` (small n only)."""
    return X @ G.T - G @ X.T


def or_matrix(X, G, L_f, theta_prox):
    """Dense ``(G - L_f X) X^T - theta I`` (small n only)."""
    return (G - L_f * X) @ X.T - theta_prox * np.eye(X.shape[0])


def block_norm_identity_check(W, k):
    """Both sides of the block-norm counting identity for k-subsets.

    ``lhs = sum over k-subsets B of ||W[B, B]||_F^2`` by enumeration;
    ``rhs = C(n-2, k-2) sum_{i != j} W_ij^2 + (k / n) C(n, k) sum_i W_ii^2``.
    """
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    W2 = W * W
    lhs = 0.0
    for B in itertools.combinations(range(n), k):
        idx = np.array(B)
        lhs += float(W2[np.ix_(idx, idx)].sum())
    diag = float(np.trace(W2))
    off = float(W2.sum()) - diag
    rhs = math.comb(n - 2, k - 2) * off + (k / n) * math.comb(n, k) * diag
    return lhs, rhs
