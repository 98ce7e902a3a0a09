"""Shapley-value feature attribution.

Three explainers share one contract (base value plus one contribution per
feature, summing to the model output):

* ``exact_shap_oracle``: direct subset enumeration against the tree value
  function.  Exponential in the feature count; it exists to certify the
  fast path and is usable up to ~20 features.
* ``tree_shap`` / ``forest_shap``: polynomial-time recursion over the tree
  that carries (fraction-one, fraction-zero, feature) triples per path
  element, equal to the oracle up to floating-point error.
* ``sampling_shap``: model-agnostic permutation estimator with exact
  per-permutation telescoping.

Every explanation built here passes through a local-accuracy gate; a gap
beyond tolerance raises instead of silently producing bad attributions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .models.forest import FlatTree, ForestModel, TreeNode, flatten_tree
from .seeding import derive_seed, substream

LOCAL_ACCURACY_TOL = 1e-8

# Gate bookkeeping: every emitted explanation records its local-accuracy
# gap here so a test run can assert that none, anywhere, violated the axiom.
_gate_count = 0
_gate_worst = 0.0


def reset_local_accuracy_gate() -> None:
    global _gate_count, _gate_worst
    _gate_count = 0
    _gate_worst = 0.0


def local_accuracy_gate_stats() -> tuple[int, float]:
    """(number of explanations emitted, worst local-accuracy gap seen)."""
    return _gate_count, _gate_worst


@dataclass(frozen=True)
class ShapExplanation:
    """Additive attribution of one model output on one instance."""

    base_value: float
    contributions: np.ndarray
    model_output: float

    @property
    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + float(self.contributions.sum()) - self.model_output)


def _emit(base: float, contributions: np.ndarray, output: float) -> ShapExplanation:
    global _gate_count, _gate_worst
    exp = ShapExplanation(float(base), np.asarray(contributions, np.float64), float(output))
    gap = exp.local_accuracy_gap
    _gate_count += 1
    if gap > _gate_worst:
        _gate_worst = gap
    if gap > LOCAL_ACCURACY_TOL:
        raise AssertionError(
            f"local accuracy violated: |base + sum(phi) - f(x)| = {gap:.3e}"
        )
    return exp


# ---------------------------------------------------------------------------
# Conditional expectation over a tree


def tree_value_function(tree: TreeNode, x, S) -> float:
    """Expected tree output when only the features in S are known.

    At a split on a feature in S the recursion follows x's branch; at any
    other split it averages both children weighted by their covers.
    """
    x = np.asarray(x, dtype=np.float64)
    known = frozenset(int(j) for j in S)

    def walk(node: TreeNode) -> float:
        if node.is_leaf:
            return node.value
        if node.feature in known:
            child = node.left if x[node.feature] <= node.threshold else node.right
            return walk(child)
        wl = node.left.cover / node.cover
        wr = node.right.cover / node.cover
        return wl * walk(node.left) + wr * walk(node.right)

    return float(walk(tree))


def _subset_values(tree: TreeNode, x: np.ndarray, p: int) -> np.ndarray:
    """tree_value_function evaluated for every subset of range(p) at once.

    Index m of the result is the value for the subset whose bit j is set
    iff feature j is known.
    """
    n_masks = 1 << p
    masks = np.arange(n_masks)
    has = [((masks >> j) & 1).astype(bool) for j in range(p)]
    out = np.zeros(n_masks)

    def walk(node: TreeNode, w: np.ndarray) -> None:
        if node.is_leaf:
            out_add = w * node.value
            np.add(out, out_add, out=out)
            return
        f = node.feature
        hf = has[f]
        wl_frac = node.left.cover / node.cover
        wr_frac = node.right.cover / node.cover
        if x[f] <= node.threshold:
            wl = np.where(hf, w, w * wl_frac)
            wr = np.where(hf, 0.0, w * wr_frac)
        else:
            wl = np.where(hf, 0.0, w * wl_frac)
            wr = np.where(hf, w, w * wr_frac)
        walk(node.left, wl)
        walk(node.right, wr)

    walk(tree, np.ones(n_masks))
    return out


def _roots_of(model) -> list[TreeNode]:
    if isinstance(model, TreeNode):
        return [model]
    if isinstance(model, ForestModel):
        return model.trees
    raise TypeError("expected a TreeNode or ForestModel")


def exact_shap_oracle(model, x, max_features: int = 20) -> ShapExplanation:
    """Shapley values by full subset enumeration (the slow, trusted route).

    phi_j = sum over subsets S of the other features of
    |S|! (p - |S| - 1)! / p! * (v(S + {j}) - v(S)), with v the tree value
    function (averaged over trees for a forest).
    """
    x = np.asarray(x, dtype=np.float64)
    roots = _roots_of(model)
    p = int(x.shape[0])
    if p > max_features:
        raise ValueError(
            f"subset enumeration over {p} features is above the {max_features} cap"
        )
    v = np.zeros(1 << p)
    for root in roots:
        v += _subset_values(root, x, p)
    v /= len(roots)

    masks = np.arange(1 << p)
    sizes = np.zeros(1 << p, dtype=np.int64)
    for j in range(p):
        sizes += (masks >> j) & 1
    fact = [math.factorial(k) for k in range(p + 1)]
    weight_by_size = np.array(
        [fact[s] * fact[p - s - 1] / fact[p] for s in range(p)]
    )

    phi = np.zeros(p)
    for j in range(p):
        without = masks[(masks >> j) & 1 == 0]
        w = weight_by_size[sizes[without]]
        phi[j] = float(np.sum(w * (v[without | (1 << j)] - v[without])))
    return _emit(v[0], phi, v[-1])


# ---------------------------------------------------------------------------
# Fast exact attribution for trees

# The kernel walks the tree once per instance, maintaining a path of
# (feature, fraction-zero, fraction-one, weight) elements.  Extending the
# path redistributes permutation weight over its lengths; unwinding removes
# an element when a feature repeats; at a leaf, each path element's
# unwound weight sum contributes to that feature's phi.


@njit(cache=True)
def _tree_shap_kernel(
    feature, threshold, left, right, value, cover, max_depth, X, phi
):  # pragma: no cover
    n_rows = X.shape[0]
    D = max_depth + 2
    pf = np.empty((D, D), np.int64)
    pz = np.empty((D, D), np.float64)
    po = np.empty((D, D), np.float64)
    pw = np.empty((D, D), np.float64)

    cap = feature.shape[0] + 2
    st_node = np.empty(cap, np.int64)
    st_row = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_pz = np.empty(cap, np.float64)
    st_po = np.empty(cap, np.float64)
    st_pf = np.empty(cap, np.int64)

    for irow in range(n_rows):
        top = 0
        st_node[0] = 0
        st_row[0] = 0
        st_depth[0] = 0
        st_pz[0] = 1.0
        st_po[0] = 1.0
        st_pf[0] = -1
        top = 1
        while top > 0:
            top -= 1
            node = st_node[top]
            row = st_row[top]
            d = st_depth[top]
            pzero = st_pz[top]
            pone = st_po[top]
            pfeat = st_pf[top]

            if row > 0:
                parent = row - 1
                for t in range(d):
                    pf[row, t] = pf[parent, t]
                    pz[row, t] = pz[parent, t]
                    po[row, t] = po[parent, t]
                    pw[row, t] = pw[parent, t]

            # extend with the incoming fractions
            pf[row, d] = pfeat
            pz[row, d] = pzero
            po[row, d] = pone
            pw[row, d] = 1.0 if d == 0 else 0.0
            for i in range(d - 1, -1, -1):
                pw[row, i + 1] += pone * pw[row, i] * (i + 1.0) / (d + 1.0)
                pw[row, i] = pzero * pw[row, i] * (d - i) / (d + 1.0)

            if feature[node] < 0:
                leaf_v = value[node]
                for i in range(1, d + 1):
                    one_f = po[row, i]
                    zero_f = pz[row, i]
                    next_one = pw[row, d]
                    total = 0.0
                    if one_f != 0.0:
                        for j in range(d - 1, -1, -1):
                            tmp = next_one / ((j + 1.0) * one_f)
                            total += tmp
                            next_one = pw[row, j] - tmp * zero_f * (d - j)
                    else:
                        for j in range(d - 1, -1, -1):
                            total += pw[row, j] / (zero_f * (d - j))
                    total *= d + 1.0
                    phi[irow, pf[row, i]] += total * (po[row, i] - pz[row, i]) * leaf_v
                continue

            f = feature[node]
            if X[irow, f] <= threshold[node]:
                hot = left[node]
                cold = right[node]
            else:
                hot = right[node]
                cold = left[node]
            hot_zero = cover[hot] / cover[node]
            cold_zero = cover[cold] / cover[node]

            iz = 1.0
            io = 1.0
            k = -1
            for i in range(d + 1):
                if pf[row, i] == f:
                    k = i
                    break
            dcur = d
            if k >= 0:
                iz = pz[row, k]
                io = po[row, k]
                next_one = pw[row, d]
                for j in range(d - 1, -1, -1):
                    if io != 0.0:
                        tmp = pw[row, j]
                        pw[row, j] = next_one * (d + 1.0) / ((j + 1.0) * io)
                        next_one = tmp - pw[row, j] * iz * (d - j) / (d + 1.0)
                    else:
                        pw[row, j] = pw[row, j] * (d + 1.0) / (iz * (d - j))
                for j in range(k, d):
                    pf[row, j] = pf[row, j + 1]
                    pz[row, j] = pz[row, j + 1]
                    po[row, j] = po[row, j + 1]
                dcur = d - 1

            st_node[top] = cold
            st_row[top] = row + 1
            st_depth[top] = dcur + 1
            st_pz[top] = cold_zero * iz
            st_po[top] = 0.0
            st_pf[top] = f
            top += 1
            st_node[top] = hot
            st_row[top] = row + 1
            st_depth[top] = dcur + 1
            st_pz[top] = hot_zero * iz
            st_po[top] = io
            st_pf[top] = f
            top += 1


def _flat_base_value(flat: FlatTree) -> float:
    leaves = flat.feature < 0
    return float(np.sum(flat.value[leaves] * flat.cover[leaves]) / flat.cover[0])


def _flat_predict(flat: FlatTree, X: np.ndarray) -> np.ndarray:
    # tiny helper for explanation bookkeeping; bulk prediction lives in
    # models.forest
    out = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        n = 0
        while flat.feature[n] >= 0:
            n = flat.left[n] if X[i, flat.feature[n]] <= flat.threshold[n] else flat.right[n]
        out[i] = flat.value[n]
    return out


def _shap_matrix_for_flats(
    flats: list[FlatTree], X: np.ndarray, p: int
) -> tuple[np.ndarray, float]:
    phi = np.zeros((X.shape[0], p))
    base = 0.0
    for flat in flats:
        _tree_shap_kernel(
            flat.feature,
            flat.threshold,
            flat.left,
            flat.right,
            flat.value,
            flat.cover,
            flat.max_depth,
            X,
            phi,
        )
        base += _flat_base_value(flat)
    phi /= len(flats)
    base /= len(flats)
    return phi, base


def tree_shap(tree: TreeNode, x) -> ShapExplanation:
    """Exact Shapley attribution of a single tree's output at x.

    x must carry every feature index the tree can reference.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    flat = flatten_tree(tree)
    n_ref = int(flat.feature.max()) + 1
    if x.shape[0] < n_ref:
        raise ValueError(
            f"instance has {x.shape[0]} features but the tree splits on index "
            f"{n_ref - 1}"
        )
    X = x[None, :]
    phi, base = _shap_matrix_for_flats([flat], X, x.shape[0])
    output = float(_flat_predict(flat, X)[0])
    return _emit(base, phi[0], output)


def forest_shap_batch(model: ForestModel, X) -> tuple[np.ndarray, float, np.ndarray]:
    """Per-row contributions for a forest: (phi matrix, base value, outputs)."""
    from .models.forest import predict_forest_batch

    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"model was fit on {model.n_features} features, got {X.shape[1]}"
        )
    phi, base = _shap_matrix_for_flats(model.flats, X, model.n_features)
    outputs = predict_forest_batch(model, X)
    return phi, base, outputs


def forest_shap(model: ForestModel, x) -> ShapExplanation:
    """Forest attribution: the mean of the per-tree attributions."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    phi, base, outputs = forest_shap_batch(model, x[None, :])
    return _emit(base, phi[0], float(outputs[0]))


# ---------------------------------------------------------------------------
# Model-agnostic sampling explainer


def sampling_shap(
    predict_fn,
    x,
    background,
    n_permutations: int = 200,
    seed: int = 0,
) -> ShapExplanation:
    """Permutation-sampling Shapley estimate for any batch predictor.

    Each permutation draws one background row and walks the permutation,
    switching features to x's values one at a time; successive prediction
    differences are credited to the switched feature, so per permutation the
    credits sum exactly to f(x) - f(background draw).  The base value is the
    mean prediction over the drawn background rows, which keeps
    base + sum(phi) = f(x) exact.  Unbiased for the marginal-expectation
    Shapley value as permutations grow.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.asarray(background, dtype=np.float64)
    if background.ndim == 1:
        background = background[None, :]
    if background.shape[0] < 1:
        raise ValueError("background must contain at least one row")
    if background.shape[1] != x.shape[0]:
        raise ValueError("background feature count does not match x")
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")

    p = x.shape[0]
    rng = substream(seed, "sampling-shap")
    perms = np.empty((n_permutations, p), dtype=np.int64)
    draws = rng.integers(0, background.shape[0], size=n_permutations)
    for k in range(n_permutations):
        perms[k] = rng.permutation(p)

    # Hybrid row t of permutation k has the first t permuted features set
    # to x; row 0 is the raw background draw, row p equals x.
    hybrids = np.empty((n_permutations * (p + 1), p))
    for k in range(n_permutations):
        block = hybrids[k * (p + 1) : (k + 1) * (p + 1)]
        block[0] = background[draws[k]]
        for t in range(p):
            block[t + 1] = block[t]
            block[t + 1, perms[k, t]] = x[perms[k, t]]
    preds = np.asarray(predict_fn(hybrids), dtype=np.float64).ravel()
    if preds.shape[0] != hybrids.shape[0]:
        raise ValueError("predict_fn must return one value per row")

    phi = np.zeros(p)
    base_acc = 0.0
    for k in range(n_permutations):
        block = preds[k * (p + 1) : (k + 1) * (p + 1)]
        base_acc += block[0]
        np.add.at(phi, perms[k], np.diff(block))
    phi /= n_permutations
    base = base_acc / n_permutations
    output = float(preds[p])  # the completed hybrid of the first permutation is x
    return _emit(base, phi, output)


# ---------------------------------------------------------------------------
# Aggregate importance and dumping


def mean_abs_shap(
    model,
    rows,
    background=None,
    n_permutations: int = 200,
    seed: int = 0,
    predict_fn=None,
) -> np.ndarray:
    """Mean of absolute per-feature contributions over the given rows.

    Forests use the exact tree explainer.  Anything else goes through the
    sampling explainer and needs ``background`` rows and a batch
    ``predict_fn`` (defaults to the model's own batch predictor when the
    model is an SvmModel or MlpModel).
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if isinstance(model, (ForestModel, TreeNode)):
        if isinstance(model, TreeNode):
            exps = [tree_shap(model, rows[i]) for i in range(rows.shape[0])]
            phi = np.stack([e.contributions for e in exps])
        else:
            phi, base, outputs = forest_shap_batch(model, rows)
            for i in range(rows.shape[0]):
                _emit(base, phi[i], float(outputs[i]))
        return np.abs(phi).mean(axis=0)

    if predict_fn is None:
        from .models.mlp import MlpModel, predict_mlp_batch
        from .models.svm import SvmModel, decision_function

        if isinstance(model, SvmModel):
            predict_fn = lambda M: decision_function(model, M)
        elif isinstance(model, MlpModel):
            predict_fn = lambda M: predict_mlp_batch(model, M)
        else:
            raise TypeError(
                "need a predict_fn for models other than forest, svm, or mlp"
            )
    if background is None:
        raise ValueError("sampling explainer needs background rows")
    phis = []
    for i in range(rows.shape[0]):
        exp = sampling_shap(
            predict_fn,
            rows[i],
            background,
            n_permutations=n_permutations,
            seed=derive_seed(seed, "row", i),
        )
        phis.append(np.abs(exp.contributions))
    return np.mean(phis, axis=0)


def explanation_records(
    explanations: list[ShapExplanation], feature_names: list[str]
) -> str:
    """Render explanations as CSV: one record per (instance, feature)."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["instance", "feature", "contribution", "base_value", "model_output"])
    for i, exp in enumerate(explanations):
        if len(exp.contributions) != len(feature_names):
            raise ValueError(
                f"explanation {i} has {len(exp.contributions)} contributions "
                f"for {len(feature_names)} feature names"
            )
        for j, name in enumerate(feature_names):
            writer.writerow(
                [
                    i,
                    name,
                    repr(float(exp.contributions[j])),
                    repr(exp.base_value),
                    repr(exp.model_output),
                ]
            )
    return buf.getvalue()
