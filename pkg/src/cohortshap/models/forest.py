"""Random forest of CART trees, built from scratch.

Trees greedily minimize cover-weighted Gini impurity, split at midpoints
between consecutive distinct sorted values, and stop when a node is pure,
too small to split, or no candidate split strictly reduces impurity.  Every
node records its cover (training rows that reached it), which the Shapley
attribution layer uses as branch weights.

The grow/predict inner loops are compiled with numba; the public surface
works in terms of plain ``TreeNode`` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from ..seeding import substream


def gini_impurity(n_pos: int, n_neg: int) -> float:
    """Gini impurity 1 - p^2 - q^2 of a two-class count pair."""
    if n_pos < 0 or n_neg < 0:
        raise ValueError("counts must be non-negative")
    total = n_pos + n_neg
    if total == 0:
        raise ValueError("gini impurity of an empty node is undefined")
    p = n_pos / total
    q = n_neg / total
    return 1.0 - p * p - q * q


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters.

    ``features_per_split=None`` means ceil(sqrt(p)), resolved at fit time.
    """

    n_trees: int = 100
    min_leaf: int = 2
    features_per_split: int | None = None
    bootstrap: bool = True

    def resolve_features_per_split(self, p: int) -> int:
        if self.features_per_split is not None:
            k = int(self.features_per_split)
        else:
            k = math.isqrt(p)
            if k * k < p:
                k += 1
        return max(1, min(k, p))


@dataclass
class TreeNode:
    """One node of a fitted tree.

    Internal nodes carry (feature, threshold, left, right); leaves have
    feature None.  ``value`` is the fraction of positive training rows at
    the node and ``cover`` the number of training rows that reached it.
    """

    value: float
    cover: int
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


class FlatTree(NamedTuple):
    """Array encoding of a tree (preorder); feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    max_depth: int


@njit(cache=True)
def _grow(X, y, min_leaf, n_candidates, rand_pool):  # pragma: no cover
    m, p = X.shape
    max_nodes = 2 * m + 1
    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    value = np.zeros(max_nodes, np.float64)
    cover = np.zeros(max_nodes, np.float64)

    idx = np.arange(m)
    swap = np.empty(m, np.int64)
    feat_buf = np.arange(p)

    stack_node = np.empty(max_nodes, np.int32)
    stack_lo = np.empty(max_nodes, np.int32)
    stack_hi = np.empty(max_nodes, np.int32)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m
    top = 1
    n_nodes = 1
    pool_pos = 0

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        mm = hi - lo
        npos = 0
        for t in range(lo, hi):
            npos += y[idx[t]]
        cover[node] = mm
        value[node] = npos / mm
        if npos == 0 or npos == mm or mm < 2 * min_leaf:
            continue

        pp = npos / mm
        parent_g = 1.0 - pp * pp - (1.0 - pp) * (1.0 - pp)

        best_g = np.inf
        best_f = -1
        best_thr = 0.0
        for c in range(n_candidates):
            r = rand_pool[pool_pos]
            pool_pos += 1
            j = c + r % (p - c)
            tmp = feat_buf[c]
            feat_buf[c] = feat_buf[j]
            feat_buf[j] = tmp
            f = feat_buf[c]

            vals = np.empty(mm, np.float64)
            for t in range(mm):
                vals[t] = X[idx[lo + t], f]
            order = np.argsort(vals)

            cpos = 0
            for t in range(mm - 1):
                cpos += y[idx[lo + order[t]]]
                v_here = vals[order[t]]
                v_next = vals[order[t + 1]]
                if v_next <= v_here:
                    continue
                nl = t + 1
                nr = mm - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                pl = cpos / nl
                gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
                pr = (npos - cpos) / nr
                gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
                wg = (nl * gl + nr * gr) / mm
                thr = 0.5 * (v_here + v_next)
                if wg < best_g or (
                    wg == best_g
                    and (f < best_f or (f == best_f and thr < best_thr))
                ):
                    best_g = wg
                    best_f = f
                    best_thr = thr

        if best_f < 0 or best_g >= parent_g:
            continue

        w = lo
        k = 0
        for t in range(lo, hi):
            s = idx[t]
            if X[s, best_f] <= best_thr:
                idx[w] = s
                w += 1
            else:
                swap[k] = s
                k += 1
        for t in range(k):
            idx[w + t] = swap[t]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack_node[top] = rid
        stack_lo[top] = w
        stack_hi[top] = hi
        top += 1
        stack_node[top] = lid
        stack_lo[top] = lo
        stack_hi[top] = w
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        cover[:n_nodes].copy(),
    )


@njit(cache=True)
def _predict_into(feature, threshold, left, right, value, X, out):  # pragma: no cover
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


def _flat_max_depth(feature, left, right) -> int:
    depth = 0
    stack = [(0, 0)]
    while stack:
        node, d = stack.pop()
        if d > depth:
            depth = d
        if feature[node] >= 0:
            stack.append((int(left[node]), d + 1))
            stack.append((int(right[node]), d + 1))
    return depth


def _grow_flat(X, y, params: ForestParams, rng: np.random.Generator) -> FlatTree:
    m, p = X.shape
    n_candidates = params.resolve_features_per_split(p)
    pool = rng.integers(0, 2**62, size=(2 * m + 1) * n_candidates, dtype=np.int64)
    arrays = _grow(X, y, params.min_leaf, n_candidates, pool)
    depth = _flat_max_depth(arrays[0], arrays[2], arrays[3])
    return FlatTree(*arrays, depth)


def _as_training_arrays(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    if y.shape != (X.shape[0],):
        raise ValueError("y length does not match X")
    y = np.ascontiguousarray(y, dtype=np.int64)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if X.shape[0] < 1:
        raise ValueError("cannot fit on an empty dataset")
    return X, y


def unflatten_tree(flat: FlatTree) -> TreeNode:
    """Materialize TreeNode objects from the array encoding."""

    def build(i: int) -> TreeNode:
        if flat.feature[i] < 0:
            return TreeNode(value=float(flat.value[i]), cover=int(flat.cover[i]))
        return TreeNode(
            value=float(flat.value[i]),
            cover=int(flat.cover[i]),
            feature=int(flat.feature[i]),
            threshold=float(flat.threshold[i]),
            left=build(int(flat.left[i])),
            right=build(int(flat.right[i])),
        )

    return build(0)


def flatten_tree(root: TreeNode) -> FlatTree:
    """Array-encode a TreeNode tree (preorder) for the compiled kernels."""
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    cover: list[float] = []

    def visit(node: TreeNode) -> int:
        i = len(feature)
        feature.append(-1 if node.is_leaf else int(node.feature))
        threshold.append(0.0 if node.threshold is None else float(node.threshold))
        left.append(-1)
        right.append(-1)
        value.append(float(node.value))
        cover.append(float(node.cover))
        if not node.is_leaf:
            left[i] = visit(node.left)
            right[i] = visit(node.right)
        return i

    visit(root)
    flat = (
        np.asarray(feature, np.int32),
        np.asarray(threshold, np.float64),
        np.asarray(left, np.int32),
        np.asarray(right, np.int32),
        np.asarray(value, np.float64),
        np.asarray(cover, np.float64),
    )
    return FlatTree(*flat, _flat_max_depth(flat[0], flat[2], flat[3]))


def fit_tree(X, y, params: ForestParams | None = None, rng=None) -> TreeNode:
    """Fit a single CART tree; ``rng`` drives the per-node feature sample.

    ``rng`` may be a numpy Generator or an int seed.  With
    ``features_per_split >= p`` the fit is fully deterministic regardless.
    """
    params = params or ForestParams()
    X, y = _as_training_arrays(X, y)
    if rng is None:
        rng = substream(0, "tree")
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(int(rng))
    return unflatten_tree(_grow_flat(X, y, params, rng))


@dataclass
class ForestModel:
    """A fitted forest: flat tree encodings plus the recipe that made them."""

    params: ForestParams
    seed: int
    n_features: int
    flats: list[FlatTree] = field(repr=False)

    @property
    def trees(self) -> list[TreeNode]:
        return [unflatten_tree(f) for f in self.flats]


def fit_forest(X, y, params: ForestParams | None = None, seed: int = 0) -> ForestModel:
    """Fit ``params.n_trees`` trees, each on its own bootstrap resample.

    Tree t consumes the substream (seed, "tree", t), so any subset of trees
    can be rebuilt independently and the fit is reproducible bit for bit.
    """
    params = params or ForestParams()
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if params.min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    X, y = _as_training_arrays(X, y)
    n = X.shape[0]
    flats = []
    for t in range(params.n_trees):
        rng = substream(seed, "tree", t)
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
            Xb = np.ascontiguousarray(X[rows])
            yb = np.ascontiguousarray(y[rows])
        else:
            Xb, yb = X, y
        flats.append(_grow_flat(Xb, yb, params, rng))
    return ForestModel(params=params, seed=seed, n_features=X.shape[1], flats=flats)


def predict_forest_batch(model: ForestModel, X) -> np.ndarray:
    """Mean leaf value across trees for each row (the positive fraction)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"model was fit on {model.n_features} features, got {X.shape[1]}"
        )
    out = np.zeros(X.shape[0], dtype=np.float64)
    for flat in model.flats:
        _predict_into(flat.feature, flat.threshold, flat.left, flat.right, flat.value, X, out)
    out /= len(model.flats)
    return out


def predict_forest(model: ForestModel, x) -> float:
    """Predicted positive fraction for one instance; label is >= 0.5."""
    return float(predict_forest_batch(model, np.asarray(x, dtype=np.float64))[0])
