import numpy as np
import pytest

from cohortshap.models.svm import (
    SvmParams,
    decision_function,
    fit_svm_smo,
    predict_svm,
    rbf_kernel,
    resolve_gamma,
)


def random_problem(seed, n=30, p=4):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = (X[:, 0] + 0.7 * X[:, 1] + 0.2 * rng.standard_normal(n) > 0).astype(int)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return X, y


def kkt_violations(model, X, y01, C, tol):
    """Count multipliers violating the stationarity conditions beyond tol."""
    ys = np.where(np.asarray(y01) == 1, 1.0, -1.0)
    f = decision_function(model, X)
    alpha = np.zeros(X.shape[0])
    alpha[model.support_indices] = np.abs(model.dual_coef)
    r = ys * f - 1.0
    eps = 1e-8
    lower = (alpha < C - eps) & (r < -tol - eps)
    upper = (alpha > eps) & (r > tol + eps)
    return int(np.sum(lower | upper))


def test_two_point_analytic_solution():
    # x = -1 and +1 with opposite labels and gamma = 0.5 admit a closed
    # form: both multipliers equal 1 / (1 - exp(-2)) and the bias is zero
    X = np.array([[-1.0], [1.0]])
    y = np.array([0, 1])
    model = fit_svm_smo(X, y, C=10.0, gamma=0.5, tol=1e-6)
    expect = 1.0 / (1.0 - np.exp(-2.0))
    assert np.abs(model.dual_coef) == pytest.approx([expect, expect], abs=1e-6)
    assert model.dual_coef[0] < 0 < model.dual_coef[1]
    assert model.bias == pytest.approx(0.0, abs=1e-9)
    assert predict_svm(model, [0.0]) == pytest.approx(0.0, abs=1e-9)
    # the margin points sit exactly on the margin
    f = decision_function(model, X)
    assert f == pytest.approx([-1.0, 1.0], abs=1e-6)


def test_identical_points_opposite_labels():
    # a contradictory pair drives both multipliers to the box and cancels
    X = np.array([[0.0], [0.0]])
    y = np.array([0, 1])
    model = fit_svm_smo(X, y, C=2.0, gamma=1.0)
    f = decision_function(model, np.array([[0.0], [3.0]]))
    assert np.abs(f) == pytest.approx([0.0, 0.0], abs=1e-9)


def test_accepts_signed_labels():
    X = np.array([[-1.0], [1.0]])
    a = fit_svm_smo(X, np.array([0, 1]), C=1.0, gamma=0.5)
    b = fit_svm_smo(X, np.array([-1, 1]), C=1.0, gamma=0.5)
    assert np.array_equal(a.dual_coef, b.dual_coef)
    assert a.bias == b.bias


def test_rejects_bad_labels_and_single_class():
    X = np.zeros((3, 1))
    with pytest.raises(ValueError):
        fit_svm_smo(X, np.array([0, 1, 2]))
    with pytest.raises(ValueError):
        fit_svm_smo(X, np.array([1, 1, 1]))


def test_kkt_conditions_hold():
    for seed in range(8):
        X, y = random_problem(seed, n=25 + seed)
        model = fit_svm_smo(X, y, C=1.0, tol=1e-3)
        assert kkt_violations(model, X, y, C=1.0, tol=1e-3) == 0


def test_dual_objective_never_decreases():
    for seed in (1, 5, 9):
        X, y = random_problem(seed)
        model = fit_svm_smo(X, y, C=1.0)
        path = np.asarray(model.dual_objective_path)
        assert path[0] == 0.0
        assert np.all(np.diff(path) >= -1e-9)
        assert path[-1] > 0.0


def test_multipliers_snap_to_box():
    X, y = random_problem(3, n=40)
    model = fit_svm_smo(X, y, C=1.0)
    a = np.abs(model.dual_coef)
    assert np.all(a > 0.0)
    interior = (a > 1e-10) & (a < 1.0 - 1e-10)
    at_C = a == 1.0
    assert np.all(interior | at_C)


def test_decision_matches_kernel_expansion():
    X, y = random_problem(7)
    model = fit_svm_smo(X, y, C=1.0)
    Q = np.array([[0.3, -0.2, 0.1, 0.5], [1.0, 1.0, -1.0, 0.0]])
    direct = rbf_kernel(Q, model.support_vectors, model.gamma) @ model.dual_coef
    assert decision_function(model, Q) == pytest.approx(direct + model.bias, abs=1e-12)


def test_training_is_deterministic():
    X, y = random_problem(11)
    a = fit_svm_smo(X, y, C=1.0)
    b = fit_svm_smo(X, y, C=1.0)
    assert np.array_equal(a.dual_coef, b.dual_coef)
    assert a.bias == b.bias
    assert a.dual_objective_path == b.dual_objective_path


def test_default_gamma_uses_feature_variance():
    X = np.array([[0.0, 0.0], [2.0, 2.0]])
    assert resolve_gamma(X, None) == pytest.approx(1.0 / (2 * X.var()))
    assert resolve_gamma(X, 0.25) == 0.25
    assert resolve_gamma(np.zeros((3, 2)), None) == pytest.approx(0.5)


def test_rbf_kernel_bounds():
    A = np.random.default_rng(0).standard_normal((5, 3))
    K = rbf_kernel(A, A, 0.7)
    assert np.allclose(np.diag(K), 1.0)
    assert np.all((K > 0.0) & (K <= 1.0))
    assert np.allclose(K, K.T)


def test_params_defaults():
    p = SvmParams()
    assert p.C == 1.0 and p.gamma is None and p.tol == 1e-3 and p.max_passes == 5
