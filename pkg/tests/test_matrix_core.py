import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coredn.errors import DataError, ZeroRankError
from coredn.leverage import leverage_scores
from coredn.matrix_core import (
    as_data_matrix,
    frobenius_norm,
    solve_weighted_least_squares,
    spectral_norm,
    thin_svd,
)


def _exact_det(M):
    # Laplace expansion over Fractions; fine for the 3x3 Gram matrices used here.
    if len(M) == 1:
        return M[0][0]
    total = Fraction(0)
    for j in range(len(M)):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        total += (-1) ** j * M[0][j] * _exact_det(minor)
    return total


def _rank_by_minors(X):
    """Rank of the Gram matrix: largest k with a non-zero k x k minor."""
    G = [[Fraction(int(v)) for v in row] for row in (X.T @ X)]
    p = len(G)
    for k in range(p, 0, -1):
        for rows in itertools.combinations(range(p), k):
            for cols in itertools.combinations(range(p), k):
                if _exact_det([[G[r][c] for c in cols] for r in rows]) != 0:
                    return k
    return 0


def _check_svd_invariants(X, svd):
    rho = svd.rank
    assert np.max(np.abs(svd.U.T @ svd.U - np.eye(rho))) <= 1e-8
    assert np.all(svd.singular_values > 0)
    assert np.all(np.diff(svd.singular_values) <= 0)
    assert frobenius_norm(svd.reconstruct() - X) <= 1e-8 * frobenius_norm(X)


def test_thin_svd_identity():
    svd = thin_svd(np.eye(3))
    assert svd.rank == 3
    np.testing.assert_allclose(np.abs(svd.U), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(svd.singular_values, [1, 1, 1])


def test_thin_svd_stacked_scaled_identity():
    X = np.vstack([np.eye(2), np.eye(2)]) / math.sqrt(2)
    svd = thin_svd(X)
    assert svd.rank == 2
    np.testing.assert_allclose(svd.singular_values, [1, 1], atol=1e-14)
    _check_svd_invariants(X, svd)


def test_thin_svd_rank_deficient_matches_minor_oracle():
    rng = np.random.default_rng(3)
    X = rng.integers(-5, 6, size=(6, 3)).astype(float)
    X[:, 2] = X[:, 0] + X[:, 1]
    assert _rank_by_minors(X) == 2
    svd = thin_svd(X)
    assert svd.rank == 2
    _check_svd_invariants(X, svd)


def test_thin_svd_zero_matrix_raises():
    with pytest.raises(ZeroRankError):
        thin_svd(np.zeros((4, 3)))


@pytest.mark.parametrize("shape", [(1, 1), (5, 5), (40, 7), (200, 50)])
def test_thin_svd_reconstruction(shape):
    X = np.random.default_rng(shape[0]).standard_normal(shape)
    svd = thin_svd(X)
    _check_svd_invariants(X, svd)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 6)),
              elements=st.floats(-1e3, 1e3)))
def test_leverage_scores_sum_to_one(X):
    if not np.any(X):
        return
    svd = thin_svd(X)
    assert abs(leverage_scores(svd).sum() - 1.0) <= 1e-8


def test_as_data_matrix_rejects_nan():
    with pytest.raises(DataError):
        as_data_matrix([[1.0, np.nan]])


@pytest.mark.parametrize(
    "X, expected",
    [(np.eye(2), math.sqrt(2)), (np.zeros((3, 2)), 0.0), (np.array([[3.0, 4.0]]), 5.0)],
)
def test_frobenius_norm(X, expected):
    assert frobenius_norm(X) == pytest.approx(expected, rel=1e-15)


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0, rel=1e-9)
    assert spectral_norm(np.diag([5.0, 2.0])) == pytest.approx(5.0, rel=1e-9)
    # Eigenvalues of [[0,1],[1,0]] solve t^2 - 1 = 0.
    assert spectral_norm([[0.0, 1.0], [1.0, 0.0]]) == pytest.approx(1.0, rel=1e-9)


def test_power_iteration_fallback_agrees():
    from coredn.matrix_core import _power_iteration

    A = np.random.default_rng(0).standard_normal((30, 5))
    est, ok = _power_iteration(A, 1e-12, 10_000, np.random.default_rng(1))
    assert ok
    assert est == pytest.approx(spectral_norm(A), rel=1e-6)


def test_weighted_least_squares_examples():
    A = np.array([[1.0], [1.0]])
    assert solve_weighted_least_squares(A, [2, 4], [1, 1])[0] == pytest.approx(3.0)
    # closed form sum(w a b) / sum(w a^2) = (6 + 4) / 4
    assert solve_weighted_least_squares(A, [2, 4], [3, 1])[0] == pytest.approx(2.5)
    np.testing.assert_allclose(solve_weighted_least_squares(np.eye(2), [7, -1], [1, 1]), [7, -1])


def test_weighted_least_squares_minimum_norm():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    g = solve_weighted_least_squares(A, [1.0, 2.0], [1.0, 1.0])
    np.testing.assert_allclose(g, [0.5, 0.5], atol=1e-12)


def test_weighted_least_squares_rejects_bad_weights():
    with pytest.raises(DataError):
        solve_weighted_least_squares(np.eye(2), [1, 2], [0, 0])
    with pytest.raises(DataError):
        solve_weighted_least_squares(np.eye(2), [1, 2], [1, -1])


@settings(max_examples=50, deadline=None)
@given(
    st.integers(2, 40).flatmap(lambda n: st.tuples(
        arrays(np.float64, (n, 3), elements=st.floats(-10, 10)),
        arrays(np.float64, (n,), elements=st.floats(-10, 10)),
        arrays(np.float64, (n,), elements=st.floats(0.01, 5)),
    ))
)
def test_weighted_residual_orthogonal_to_column_space(args):
    A, b, w = args
    g = solve_weighted_least_squares(A, b, w)
    normal = A.T @ (w * (A @ g - b))
    scale = max(1.0, np.abs(A).max() ** 2 * np.abs(w).sum() * max(1.0, np.abs(b).max()))
    assert np.max(np.abs(normal)) <= 1e-7 * scale
