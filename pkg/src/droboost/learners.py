"""Depth-limited classification trees fitted as least-squares projections.

A tree with leaves in {-1, +1} has ||f||^2 = 1 on the data, so minimising
(1/N) sum (f_i - g_i)^2 is the same as maximising sum_i f_i g_i.  For one leaf
holding rows S the best value is sign(sum_S g) and it contributes |sum_S g|,
so splits are scored by |sum_left g| + |sum_right g|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, DataError, DimensionError

LEAF = -1
# relative slack when comparing split scores; keeps tie-breaking stable under rounding
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 5
    min_leaf: int = 1

    def __post_init__(self):
        if int(self.max_depth) < 1:
            raise ValueError("max_depth must be >= 1")
        if int(self.min_leaf) < 1:
            raise ValueError("min_leaf must be >= 1")


class Tree:
    """Binary tree stored as flat preorder arrays.

    Internal node k sends x left iff ``x[feature[k]] <= threshold[k]``.  Leaves
    have ``feature == -1`` and carry ``value`` in {-1, +1}.
    """

    __slots__ = ("feature", "threshold", "value", "left", "right", "n_features")

    def __init__(self, feature, threshold, value, left, right, n_features: int):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.value = np.asarray(value, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.n_features = int(n_features)
        for arr in (self.feature, self.threshold, self.value, self.left, self.right):
            arr.setflags(write=False)

    @classmethod
    def leaf(cls, value: float, n_features: int) -> "Tree":
        return cls([LEAF], [0.0], [value], [LEAF], [LEAF], n_features)

    @classmethod
    def stump(cls, feature: int, threshold: float, left_value: float, right_value: float,
              n_features: int) -> "Tree":
        return cls(
            [feature, LEAF, LEAF],
            [threshold, 0.0, 0.0],
            [0.0, left_value, right_value],
            [1, LEAF, LEAF],
            [2, LEAF, LEAF],
            n_features,
        )

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        def walk(k):
            if self.feature[k] == LEAF:
                return 0
            return 1 + max(walk(self.left[k]), walk(self.right[k]))
        return walk(0)

    def predict_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionError(f"tree expects {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while np.any(active):
            r = rows[active]
            k = node[r]
            go_left = X[r, self.feature[k]] <= self.threshold[k]
            node[r] = np.where(go_left, self.left[k], self.right[k])
            active[r] = self.feature[node[r]] != LEAF
        return self.value[node].copy()

    def __call__(self, x) -> float:
        return predict(self, x)

    def key(self) -> tuple:
        """Hashable structural identity, used to compare learner selections."""
        return (
            tuple(self.feature.tolist()),
            tuple(self.threshold.tolist()),
            tuple(self.value.tolist()),
        )

    def __eq__(self, other):
        return isinstance(other, Tree) and self.n_features == other.n_features and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        if self.n_nodes == 1:
            return f"Tree(leaf={self.value[0]:+g})"
        return f"Tree(nodes={self.n_nodes}, depth={self.depth}, root=x[{self.feature[0]}]<={self.threshold[0]:.6g})"


def predict(learner: Tree, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != learner.n_features:
        raise DimensionError(f"expected a vector of {learner.n_features} features, got shape {x.shape}")
    k = 0
    while learner.feature[k] != LEAF:
        k = learner.left[k] if x[learner.feature[k]] <= learner.threshold[k] else learner.right[k]
    return float(learner.value[k])


def _sign(s: float) -> float:
    return 1.0 if s >= 0.0 else -1.0


def _best_split(X: np.ndarray, g: np.ndarray, min_leaf: int, tol: float):
    """Best (score, feature, threshold, left_mask) for one node, or None."""
    n, d = X.shape
    best = None
    if n < 2 * min_leaf:
        return None
    total = float(np.sum(g))
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        csum = np.cumsum(g[order])
        # position k splits rows [0..k] | [k+1..n-1]
        k = np.arange(min_leaf - 1, n - min_leaf)
        if k.size == 0:
            continue
        k = k[xs[k] < xs[k + 1]]
        if k.size == 0:
            continue
        left = csum[k]
        score = np.abs(left) + np.abs(total - left)
        top = float(np.max(score))
        i = int(np.argmax(score >= top - tol))
        if best is None or top > best[0] + tol:
            kk = int(k[i])
            thr = 0.5 * (xs[kk] + xs[kk + 1])
            if not (xs[kk] <= thr < xs[kk + 1]):
                thr = float(xs[kk])
            best = (top, j, float(thr))
    return best


def fit_projection(data: Dataset, target, config: TreeConfig) -> Tree:
    """Greedy projection of ``target`` onto depth-limited trees with +-1 leaves.

    Ties between candidate splits go to the smallest feature index, then the
    smallest threshold.  A node becomes a leaf when no split improves its score.
    """
    g = np.asarray(target, dtype=np.float64)
    X = data.features
    if g.shape != (data.N,):
        raise DimensionError(f"target has shape {g.shape}, expected ({data.N},)")
    if not np.all(np.isfinite(g)):
        raise ValueError("target must be finite")
    if data.N < 2 * config.min_leaf:
        raise DataError(f"need at least {2 * config.min_leaf} rows, got {data.N}")
    tol = TIE_RTOL * max(float(np.sum(np.abs(g))), np.finfo(float).tiny)

    feature, threshold, value, left, right = [], [], [], [], []

    def grow(rows: np.ndarray, depth: int) -> int:
        k = len(feature)
        gs = g[rows]
        s = float(np.sum(gs))
        feature.append(LEAF)
        threshold.append(0.0)
        value.append(_sign(s))
        left.append(LEAF)
        right.append(LEAF)
        if depth >= config.max_depth:
            return k
        split = _best_split(X[rows], gs, config.min_leaf, tol)
        if split is None or split[0] <= abs(s) + tol:
            return k
        _, j, thr = split
        go_left = X[rows, j] <= thr
        feature[k] = j
        threshold[k] = thr
        value[k] = 0.0
        left[k] = grow(rows[go_left], depth + 1)
        right[k] = grow(rows[~go_left], depth + 1)
        return k

    grow(np.arange(data.N), 0)
    return Tree(feature, threshold, value, left, right, data.d)


def projection_error(learner: Tree, data: Dataset, target) -> float:
    """||f - target||^2 under the empirical inner product."""
    diff = learner.predict_many(data.features) - np.asarray(target, dtype=np.float64)
    return float(np.mean(diff * diff))
