import numpy as np
import pytest
from hypothesis import given, strategies as st

from kpl import (PreconditionerBreakdown, SparseMatrix, dot, identity,
                 laplacian_2d, make_ic0, make_jacobi, random_spd, spmv)

from conftest import dense_spd


def test_identity_returns_input_bitwise():
    v = np.array([1.0, -0.0, 3.5])
    assert identity().apply(v) is v


def test_jacobi_scaled_identity():
    A = SparseMatrix.from_dense(2.0 * np.eye(3))
    M = make_jacobi(A)
    v = np.array([2.0, 4.0, 8.0])
    assert np.array_equal(M.apply(v), [1.0, 2.0, 4.0])


def test_jacobi_identity_matrix():
    M = make_jacobi(SparseMatrix.from_dense(np.eye(4)))
    v = np.arange(4.0)
    assert np.array_equal(M.apply(v), v)


def test_jacobi_constant_laplacian_diagonal():
    M = make_jacobi(laplacian_2d(3, 3))
    v = np.arange(9.0)
    assert np.array_equal(M.apply(v), v / 4.0)


def test_jacobi_rejects_nonpositive_diagonal():
    a = np.array([[1.0, 0.0], [0.0, -2.0]])
    with pytest.raises(ValueError, match="row 1"):
        make_jacobi(SparseMatrix.from_dense(a))


def test_ic0_diagonal_matrix():
    d = np.array([4.0, 9.0, 16.0])
    M = make_ic0(SparseMatrix.from_dense(np.diag(d)), eta=0.0)
    v = np.array([1.0, 1.0, 1.0])
    assert np.allclose(M.apply(v), v / d, rtol=1e-15)


def test_ic0_compensation_shift():
    M = make_ic0(SparseMatrix.from_dense(np.eye(3)), eta=0.5)
    v = np.array([3.0, 6.0, 9.0])
    assert np.allclose(M.apply(v), v / 1.5, rtol=1e-15)


def test_ic0_defining_equations_on_laplacian():
    # the factor must reproduce lower(A) exactly on its own pattern
    A = laplacian_2d(4, 4)
    M = make_ic0(A, eta=0.0)
    row_ptr, col_idx, l_vals = M._l
    L = np.zeros((A.n, A.n))
    for i in range(A.n):
        for k in range(row_ptr[i], row_ptr[i + 1]):
            L[i, col_idx[k]] = l_vals[k]
    product = L @ L.T
    dense = A.to_dense()
    lower_pattern = (np.tril(dense) != 0)
    err = np.abs(product - dense)[lower_pattern]
    assert err.max() <= 1e-12


def test_ic0_full_pattern_is_complete_cholesky(rng):
    a = dense_spd(8, rng)
    A = SparseMatrix.from_dense(a)
    M = make_ic0(A, eta=0.0)
    v = rng.normal(size=8)
    expected = np.linalg.solve(a, v)
    assert np.linalg.norm(M.apply(v) - expected) <= 1e-10 * np.linalg.norm(expected)


def test_ic0_breakdown_reports_row():
    # symmetric with positive diagonal but indefinite: second pivot fails
    a = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(PreconditionerBreakdown) as exc:
        make_ic0(SparseMatrix.from_dense(a), eta=0.0)
    assert exc.value.row == 1


@given(st.integers(0, 100))
def test_ic0_large_eta_never_breaks_down(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 12))
    a = rng.normal(size=(n, n))
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, np.abs(a).sum(axis=1) + 1.0)  # diagonally dominant
    make_ic0(SparseMatrix.from_dense(a), eta=1.0)


@pytest.mark.parametrize("make", [
    lambda A: identity(),
    make_jacobi,
    lambda A: make_ic0(A, eta=0.0),
])
def test_apply_is_spd_operator(make, rng):
    A = laplacian_2d(4, 3)
    M = make(A)
    for _ in range(5):
        v = rng.normal(size=A.n)
        w = rng.normal(size=A.n)
        lhs = dot(M.apply(v), w)
        rhs = dot(v, M.apply(w))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1.0)
        assert dot(M.apply(v), v) > 0.0


def test_mu_tilde_values():
    A = laplacian_2d(3, 3)
    assert identity().mu_tilde == 1
    assert make_jacobi(A).mu_tilde == 1
    M = make_ic0(A, eta=0.0)
    row_ptr, col_idx, _ = M._l
    counts = np.diff(row_ptr)
    t_counts = np.zeros(A.n, dtype=int)
    for c in col_idx:
        t_counts[c] += 1
    assert M.mu_tilde == (counts + t_counts - 1).max()


def test_norm_estimate(rng):
    A = laplacian_2d(3, 3)
    assert identity().norm_estimate() == 1.0
    assert make_jacobi(A).norm_estimate() == pytest.approx(0.25)
    # full pattern: IC(0) is the complete factor, so M^{-1} is A^{-1}
    a = dense_spd(8, rng)
    M = make_ic0(SparseMatrix.from_dense(a), eta=0.0)
    exact = np.linalg.norm(np.linalg.inv(a), 2)
    assert M.norm_estimate() == pytest.approx(exact, rel=0.1)


def test_apply_dimension_mismatch():
    M = make_jacobi(laplacian_2d(2, 2))
    with pytest.raises(ValueError):
        M.apply(np.ones(3))


def test_negative_eta_rejected():
    with pytest.raises(ValueError):
        make_ic0(laplacian_2d(2, 2), eta=-0.1)
