import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from rmplate.linalg import Factorization, SolverError, sparse_solve


def test_identity():
    b = np.arange(5.0)
    np.testing.assert_allclose(sparse_solve(sp.identity(5), b), b)


def test_two_by_two():
    x = sparse_solve(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(x, [2 / 3, -1 / 3], atol=1e-15)


def test_random_spd_residual():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((200, 200))
    A = sp.csr_matrix(M.T @ M + np.eye(200))
    b = rng.standard_normal(200)
    fac = Factorization(A, "spd")
    x = fac.solve(b)
    assert fac.residual <= 1e-10
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-10


def test_saddle_point():
    rng = np.random.default_rng(1)
    n, m = 30, 10
    M = rng.standard_normal((n, n))
    A = M @ M.T + n * np.eye(n)
    B = rng.standard_normal((m, n))
    K = sp.bmat([[sp.csr_matrix(A), sp.csr_matrix(B.T)], [sp.csr_matrix(B), None]], format="csc")
    b = rng.standard_normal(n + m)
    x = sparse_solve(K, b, kind="saddle")
    assert np.linalg.norm(K @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_multiple_right_hand_sides():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((40, 40))
    A = sp.csr_matrix(M @ M.T + np.eye(40))
    B = rng.standard_normal((40, 3))
    X = Factorization(A).solve(B)
    np.testing.assert_allclose(X, np.linalg.solve(A.toarray(), B), rtol=1e-10, atol=1e-12)


def test_zero_rhs_and_empty():
    A = sp.identity(3, format="csr")
    assert not np.any(sparse_solve(A, np.zeros(3)))
    assert sparse_solve(sp.csr_matrix((0, 0)), np.zeros(0)).shape == (0,)


def test_singular_matrix_raises():
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolverError):
        sparse_solve(A, np.array([1.0, 0.0]))


def test_rejects_non_square_and_kind():
    with pytest.raises(ValueError):
        Factorization(sp.csr_matrix((2, 3)))
    with pytest.raises(ValueError):
        Factorization(sp.identity(2), "lu")


def test_badly_scaled_system():
    """Diagonal spread of 1e10 in A, as the t^-2 shear term produces at t = 1e-3."""
    rng = np.random.default_rng(3)
    n = 60
    M = rng.standard_normal((n, n))
    A = M @ M.T + np.eye(n)
    d = 10.0 ** rng.uniform(-2, 3, n)
    A = sp.csr_matrix(d[:, None] * A * d[None, :])
    b = rng.standard_normal(n)
    fac = Factorization(A)
    x = fac.solve(b)
    assert fac.residual <= 1e-10


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**31 - 1))
def test_spd_solutions_match_dense(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    A = M @ M.T + np.eye(n)
    b = rng.standard_normal(n)
    x = sparse_solve(sp.csr_matrix(A), b)
    np.testing.assert_allclose(A @ x, b, atol=1e-9 * np.linalg.norm(b))
