"""Array-backed CART trees.

Splits are searched exhaustively over midpoints between consecutive distinct
sorted values. Candidates whose gain is within a relative ``1e-12`` of the
best are treated as ties and resolved toward the lowest feature index, then
the lowest threshold, so the chosen split does not depend on floating-point
noise in the cumulative sums.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf reached by each row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }


def _split_gains(y_sorted: np.ndarray, criterion: str) -> np.ndarray:
    """Impurity reduction (in sum-of-squares or n*Gini units) at every cut.

    ``y_sorted`` has shape ``(n, m)``: targets ordered by each candidate
    feature. Row ``i`` of the result is the gain of cutting after position i.
    """
    n = y_sorted.shape[0]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    if criterion == "mse":
        cs = np.cumsum(y_sorted, axis=0)
        total = cs[-1]
        left = cs[:-1]
        right = total - left
        return left * left / n_left + right * right / n_right - total * total / n
    ones = np.cumsum(y_sorted, axis=0)
    c1 = ones[-1]
    c0 = n - c1
    l1 = ones[:-1]
    l0 = n_left - l1
    r1 = c1 - l1
    r0 = n_right - r1
    return (l1 * l1 + l0 * l0) / n_left + (r1 * r1 + r0 * r0) / n_right - (c1 * c1 + c0 * c0) / n


def best_split(X: np.ndarray, y: np.ndarray, features, criterion: str, min_samples_leaf: int):
    """Best ``(feature, threshold, gain)`` over ``features``, or ``None``.

    Row order of ``(X, y)`` does not affect the result: targets are put in a
    canonical order before the cumulative sums.
    """
    n = y.shape[0]
    if n < 2 * min_samples_leaf:
        return None
    features = np.asarray(features, dtype=np.intp)
    by_y = np.argsort(y, kind="stable")
    Xf = X[by_y][:, features]
    yc = y[by_y]
    if criterion == "mse":
        yc = yc - np.sum(yc) / n
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    gains = _split_gains(yc[order], criterion)

    valid = xs[:-1] < xs[1:]
    lo = min_samples_leaf - 1
    hi = n - min_samples_leaf - 1
    valid[:lo] = False
    valid[hi + 1:] = False
    gains = np.where(valid, gains, -np.inf)
    g_max = gains.max()
    if not np.isfinite(g_max) or g_max <= 0:
        return None
    if criterion == "mse":
        scale = float(np.sum(yc * yc))
    else:
        scale = float(n)
    tol = _TIE_RTOL * max(g_max, scale)
    if g_max <= tol:
        return None
    hit = gains >= g_max - tol
    col = int(np.flatnonzero(hit.any(axis=0))[0])
    pos = int(np.flatnonzero(hit[:, col])[0])
    a, b = xs[pos, col], xs[pos + 1, col]
    threshold = a + (b - a) / 2.0
    if not a <= threshold < b:
        threshold = a
    return int(features[col]), float(threshold), float(gains[pos, col])


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    criterion: str,
    max_depth,
    min_samples_leaf: int,
    max_features: int,
    rng: np.random.Generator,
) -> Tree:
    """Grow one tree depth-first on ``(X, y)``.

    ``criterion`` is ``"mse"`` (leaf value = mean target) or ``"gini"``
    (binary 0/1 targets, leaf value = share of ones).
    """
    p = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr, v in ((feature, LEAF), (threshold, np.nan), (left, LEAF), (right, LEAF), (value, np.nan)):
            arr.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(y.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yv = y[idx]
        split = None
        if (max_depth is None or depth < max_depth) and yv.min() != yv.max():
            if max_features < p:
                feats = np.sort(rng.choice(p, size=max_features, replace=False))
            else:
                feats = np.arange(p)
            split = best_split(X[idx], yv, feats, criterion, min_samples_leaf)
        if split is None:
            value[node] = _leaf_value(yv, criterion)
            continue
        f, thr, _ = split
        mask = X[idx, f] <= thr
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node] = f, thr
        left[node], right[node] = lnode, rnode
        stack.append((rnode, idx[~mask], depth + 1))
        stack.append((lnode, idx[mask], depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=float),
    )


def _leaf_value(yv: np.ndarray, criterion: str) -> float:
    if criterion == "gini":
        return float(np.sum(yv)) / yv.shape[0]
    # Sorted summation keeps the value independent of row order; the clip
    # guards against rounding pushing the mean past the extremes.
    ys = np.sort(yv)
    return float(np.clip(np.sum(ys) / ys.shape[0], ys[0], ys[-1]))
