"""Soft-margin RBF-kernel SVM trained by sequential minimal optimization.

The optimizer repeatedly sweeps the training set, picks a multiplier that
violates the KKT conditions beyond ``tol``, pairs it with a second
multiplier chosen by the largest-error-gap heuristic (deterministic
fallbacks, no randomness), and solves the two-variable subproblem in closed
form.  Training ends after ``max_passes`` consecutive sweeps without an
accepted update.  The dual objective is recorded once per sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SNAP = 1e-10
_MAX_SWEEPS = 2000


@dataclass(frozen=True)
class SvmParams:
    C: float = 1.0
    gamma: float | None = None  # None: 1 / (p * mean feature variance)
    tol: float = 1e-3
    max_passes: int = 5


@dataclass
class SvmModel:
    """Support vectors and dual coefficients (alpha_i * y_i) of a fitted SVM."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float
    support_indices: np.ndarray
    dual_objective_path: tuple[float, ...]


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * squared euclidean distance) for all row pairs."""
    a2 = np.sum(A * A, axis=1)[:, None]
    b2 = np.sum(B * B, axis=1)[None, :]
    sq = a2 + b2 - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def resolve_gamma(X: np.ndarray, gamma: float | None) -> float:
    if gamma is not None:
        return float(gamma)
    p = X.shape[1]
    var = float(X.var())
    if var <= 0.0:
        var = 1.0
    return 1.0 / (p * var)


def _as_signed_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    vals = set(np.unique(y).tolist())
    if vals <= {0.0, 1.0}:
        return np.where(y > 0.5, 1.0, -1.0)
    if vals <= {-1.0, 1.0}:
        return y.copy()
    raise ValueError("labels must be 0/1 or -1/+1")


def _dual_objective(alpha, ay, K) -> float:
    return float(alpha.sum() - 0.5 * (ay @ K @ ay))


def fit_svm_smo(
    X,
    y,
    C: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_passes: int = 5,
) -> SvmModel:
    """Fit on (already standardized) rows; y may be 0/1 or -1/+1.

    Only multipliers strictly above zero are retained as support vectors.
    Both classes must be present.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    ys = _as_signed_labels(y)
    n = X.shape[0]
    if ys.shape != (n,):
        raise ValueError("y length does not match X")
    if C <= 0:
        raise ValueError("C must be positive")
    if len(np.unique(ys)) < 2:
        raise ValueError("need both classes to fit")
    g = resolve_gamma(X, gamma)
    K = rbf_kernel(X, X, g)

    alpha = np.zeros(n)
    b = 0.0
    # E[i] = f(x_i) - y_i, kept incrementally up to date
    E = -ys.copy()

    def take_step(i: int, j: int) -> bool:
        nonlocal b
        if i == j:
            return False
        ai, aj = alpha[i], alpha[j]
        yi, yj = ys[i], ys[j]
        Ei, Ej = E[i], E[j]
        s = yi * yj
        if yi != yj:
            L = max(0.0, aj - ai)
            H = min(C, C + aj - ai)
        else:
            L = max(0.0, ai + aj - C)
            H = min(C, ai + aj)
        if L == H:
            return False
        k11, k22, k12 = K[i, i], K[j, j], K[i, j]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0.0:
            aj_new = aj + yj * (Ei - Ej) / eta
            if aj_new < L:
                aj_new = L
            elif aj_new > H:
                aj_new = H
        else:
            # Flat or concave direction: test the box ends of the
            # minimization objective and keep the better one.
            f1 = yi * (Ei + b) - ai * k11 - s * aj * k12
            f2 = yj * (Ej + b) - s * ai * k12 - aj * k22
            L1 = ai + s * (aj - L)
            H1 = ai + s * (aj - H)
            Lobj = (
                L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22
                + s * L * L1 * k12
            )
            Hobj = (
                H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22
                + s * H * H1 * k12
            )
            if Lobj < Hobj - 1e-12:
                aj_new = L
            elif Lobj > Hobj + 1e-12:
                aj_new = H
            else:
                return False
        if abs(aj_new - aj) < 1e-12 * (aj_new + aj + 1e-12):
            return False
        ai_new = ai + s * (aj - aj_new)
        if ai_new < _SNAP:
            ai_new = 0.0
        elif ai_new > C - _SNAP:
            ai_new = C
        if aj_new < _SNAP:
            aj_new = 0.0
        elif aj_new > C - _SNAP:
            aj_new = C
        di = yi * (ai_new - ai)
        dj = yj * (aj_new - aj)
        b1 = b - Ei - di * k11 - dj * k12
        b2 = b - Ej - di * k12 - dj * k22
        if 0.0 < ai_new < C:
            b_new = b1
        elif 0.0 < aj_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        E[:] += di * K[i] + dj * K[j] + (b_new - b)
        alpha[i] = ai_new
        alpha[j] = aj_new
        b = b_new
        return True

    def second_choice(i: int):
        non_bound = np.flatnonzero((alpha > 0.0) & (alpha < C))
        if non_bound.size > 1 or (non_bound.size == 1 and non_bound[0] != i):
            cand = non_bound[non_bound != i]
            yield int(cand[np.argmax(np.abs(E[i] - E[cand]))])
        for step in range(1, n):
            yield (i + step) % n

    passes = 0
    sweeps = 0
    path = [0.0]
    ay = alpha * ys
    while passes < max_passes and sweeps < _MAX_SWEEPS:
        changed = 0
        for i in range(n):
            r = E[i] * ys[i]
            if (r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0.0):
                for j in second_choice(i):
                    if take_step(i, j):
                        changed += 1
                        break
        sweeps += 1
        ay = alpha * ys
        path.append(_dual_objective(alpha, ay, K))
        passes = passes + 1 if changed == 0 else 0

    b = _final_bias(alpha, ys, K, C, b)

    sv = np.flatnonzero(alpha > 0.0)
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coef=alpha[sv] * ys[sv],
        bias=float(b),
        gamma=g,
        C=float(C),
        support_indices=sv,
        dual_objective_path=tuple(path),
    )


def _final_bias(alpha, ys, K, C, fallback, eps=1e-8):
    """Bias consistent with the final multipliers.

    The dual solution fixes the bias only through the KKT conditions:
    free support vectors pin it exactly, otherwise it may lie anywhere in
    an interval bounded by the at-bound points.  The running estimate kept
    during the sweeps can drift just outside that interval, so it is
    recomputed here from scratch.
    """
    margins = K @ (alpha * ys)  # decision values without the bias term
    gap = ys - margins
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        return float(gap[free].mean())
    lower = ((alpha <= eps) & (ys > 0)) | ((alpha >= C - eps) & (ys < 0))
    upper = ((alpha <= eps) & (ys < 0)) | ((alpha >= C - eps) & (ys > 0))
    if lower.any() and upper.any():
        return float((gap[lower].max() + gap[upper].min()) / 2.0)
    return fallback


def decision_function(model: SvmModel, X) -> np.ndarray:
    """Signed decision values for a batch of rows."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(
            f"model was fit on {model.support_vectors.shape[1]} features, "
            f"got {X.shape[1]}"
        )
    if model.support_vectors.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    Kx = rbf_kernel(X, model.support_vectors, model.gamma)
    return Kx @ model.dual_coef + model.bias


def predict_svm(model: SvmModel, x) -> float:
    """Signed decision value for one instance; the label is its sign."""
    return float(decision_function(model, np.asarray(x, dtype=np.float64))[0])
