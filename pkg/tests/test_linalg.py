import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gapriv.linalg import NumericError, frob_sq, pinv, residual


def test_pinv_scalar():
    np.testing.assert_allclose(pinv([[2.0]]), [[0.5]])


def test_pinv_zero_matrix_is_transposed_zero():
    P = pinv(np.zeros((2, 3)))
    assert P.shape == (3, 2)
    assert np.all(P == 0)


def test_pinv_projector_is_its_own_pseudoinverse():
    M = np.array([[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(pinv(M), M)


def test_pinv_empty_dimensions():
    assert pinv(np.zeros((4, 0))).shape == (0, 4)
    assert pinv(np.zeros((0, 3))).shape == (3, 0)


def test_pinv_rank_tol_truncates():
    M = np.diag([1.0, 1e-3])
    np.testing.assert_allclose(pinv(M, rank_tol=1e-2), np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        pinv(M, rank_tol=-1.0)


def test_pinv_rejects_non_finite():
    with pytest.raises(ValueError):
        pinv([[np.nan, 1.0]])


def test_pinv_non_convergence_is_explicit(monkeypatch):
    def boom(*a, **k):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(np.linalg, "svd", boom)
    with pytest.raises(NumericError):
        pinv(np.eye(2))


def test_residual_onto_ones_is_mean_removal():
    # normal equations: theta = mean(y) = 2
    res, norm = residual([[1.0], [1.0]], [1.0, 3.0])
    np.testing.assert_allclose(res, [-1.0, 1.0])
    assert norm == pytest.approx(np.sqrt(2.0))


def test_residual_full_column_space():
    res, norm = residual(np.eye(2), [5.0, 7.0])
    np.testing.assert_allclose(res, 0.0, atol=1e-12)
    assert norm == pytest.approx(0.0, abs=1e-12)


def test_residual_no_columns():
    res, norm = residual(np.zeros((2, 0)), [3.0, 4.0])
    np.testing.assert_array_equal(res, [3.0, 4.0])
    assert norm == 5.0


def test_residual_dimension_mismatch():
    with pytest.raises(ValueError):
        residual(np.ones((3, 2)), np.ones(2))


@pytest.mark.parametrize("M, expected", [([[3.0, 4.0]], 25.0), (np.zeros((3, 3)), 0.0), ([[1, 1], [1, 1]], 4.0)])
def test_frob_sq(M, expected):
    assert frob_sq(M) == expected


matrices = st.tuples(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31), st.integers(0, 12)).map(
    lambda t: _random_matrix(*t)
)


def _random_matrix(m, n, seed, rank):
    r = np.random.default_rng(seed)
    if rank and rank < min(m, n):
        return r.standard_normal((m, rank)) @ r.standard_normal((rank, n)) / np.sqrt(rank)
    return r.uniform(-1, 1, size=(m, n))


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_penrose_conditions(M):
    P = pinv(M)
    assume(np.abs(P).max() <= 10.0)  # absolute tolerance presumes O(1) entries
    np.testing.assert_allclose(M @ P @ M, M, atol=1e-8)
    np.testing.assert_allclose(P @ M @ P, P, atol=1e-8)
    np.testing.assert_allclose((M @ P).T, M @ P, atol=1e-8)
    np.testing.assert_allclose((P @ M).T, P @ M, atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(matrices, st.integers(0, 2**31))
def test_residual_orthogonal_and_contracting(X, seed):
    y = np.random.default_rng(seed).standard_normal(X.shape[0])
    res, norm = residual(X, y)
    for col in X.T:
        assert abs(col @ res) <= 1e-8 * max(np.linalg.norm(col) * norm, 1e-300) + 1e-12
    assert norm <= np.linalg.norm(y) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31), st.floats(1e-6, 1e-2))  # condition number up to 1e6
def test_penrose_scale_relative_when_ill_conditioned(n, seed, smallest):
    r = np.random.default_rng(seed)
    U, _ = np.linalg.qr(r.standard_normal((n, n)))
    V, _ = np.linalg.qr(r.standard_normal((n, n)))
    s = np.linspace(1.0, smallest, n)
    M = U @ np.diag(s) @ V.T
    P = pinv(M)
    scale = np.abs(P).max()
    assert np.max(np.abs(P @ M @ P - P)) <= 1e-8 * scale
    assert np.max(np.abs(M @ P @ M - M)) <= 1e-8
