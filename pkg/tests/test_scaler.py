import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cohortshap.models.scaler import Scaler, fit_scaler, transform


def test_two_point_column():
    sc = fit_scaler(np.array([[1.0], [3.0]]))
    assert sc.mean[0] == 2.0
    assert sc.std[0] == 1.0  # population std, not sample std
    out = transform(sc, np.array([[1.0], [3.0]]))
    assert out.ravel().tolist() == [-1.0, 1.0]


def test_population_std():
    X = np.array([[1.0], [2.0], [3.0]])
    sc = fit_scaler(X)
    assert sc.std[0] == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-15)


def test_constant_column_is_pinned():
    X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    sc = fit_scaler(X)
    assert sc.mean[0] == 5.0 and sc.std[0] == 0.0
    out = transform(sc, X)
    # a constant training column transforms to exactly zero, no NaN/inf
    assert np.all(out[:, 0] == 0.0)
    assert np.isfinite(out).all()
    # unseen values offset by the pinned mean, divided by one
    shifted = transform(sc, np.array([[7.0, 2.0]]))
    assert shifted[0, 0] == 2.0


def test_transform_promotes_single_row():
    sc = fit_scaler(np.array([[0.0, 10.0], [2.0, 30.0]]))
    out = transform(sc, np.array([1.0, 20.0]))
    assert out.shape == (1, 2)
    assert out[0].tolist() == [0.0, 0.0]


def test_transform_width_mismatch():
    sc = fit_scaler(np.array([[0.0, 1.0]]))
    with pytest.raises(ValueError):
        transform(sc, np.array([[1.0, 2.0, 3.0]]))


@given(
    X=hnp.arrays(
        np.float64,
        st.tuples(st.integers(2, 12), st.integers(1, 4)),
        elements=st.floats(-1e6, 1e6),
    )
)
def test_transformed_moments(X):
    sc = fit_scaler(X)
    out = transform(sc, X)
    for j in range(X.shape[1]):
        col = out[:, j]
        if sc.std[j] == 0.0:
            # constant columns give exact zeros; a column whose variance
            # underflows float64 stays within the underflow scale
            assert np.all(np.abs(col) < 1e-150)
        else:
            # cancellation in (x - mean) scales with |mean| / std
            tol = 1e-9 * (1.0 + abs(sc.mean[j]) / sc.std[j])
            assert abs(col.mean()) < tol
            assert abs(col.std() - 1.0) < tol
