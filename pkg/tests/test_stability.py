import numpy as np
import pytest
from hypothesis import given, strategies as st

from kpl import (CoefficientHistory, LocalErrorBounds, UNIT_ROUNDOFF,
                 VectorNorms, amplification_factor, default_sigma_grid,
                 gap_epsilon_bounds, laplacian_2d, local_error_bounds,
                 local_error_bounds_variable, make_jacobi, matrix_2norm,
                 modeled_gap_evolution, propagation_matrix,
                 propagation_matrix_variable, propagation_product,
                 select_shift)

finite = st.floats(-10.0, 10.0, allow_nan=False)
coeff = st.floats(1e-3, 5.0, allow_nan=False)


def random_history(n, seed):
    rng = np.random.default_rng(seed)
    return CoefficientHistory(rng.uniform(0.1, 2.0, n), rng.uniform(0.1, 1.5, n))


def test_propagation_matrix_direct_substitution():
    assert np.array_equal(
        propagation_matrix(1.0, 0.0, 0.0),
        [[1, 0, -1, 0], [0, 0, 1, 0], [0, 0, 1, 0], [0, 0, 0, 0]])
    assert np.array_equal(
        propagation_matrix(2.0, 0.5, 1.0),
        [[1, -1, -2, 0], [0, 0.5, 1, 0], [0, -1, -1, -1], [0, 0, 0, 0.5]])


@given(finite, finite)
def test_zero_shift_shape(alpha, beta):
    P = propagation_matrix(alpha, beta, 0.0)
    # reduces to the unshifted pipelined form: no shift coupling in row 3
    assert P[2, 1] == 0.0
    assert P[2, 2] == 1.0
    assert np.array_equal(P[2], [0.0, 0.0, 1.0, -alpha * beta])


@given(finite, finite, finite)
def test_first_column_is_e1(alpha, beta, sigma):
    P = propagation_matrix(alpha, beta, sigma)
    assert np.array_equal(P[:, 0], [1.0, 0.0, 0.0, 0.0])


@given(finite, finite, finite)
def test_variable_matches_fixed_for_equal_shifts(alpha, beta, sigma):
    assert np.array_equal(propagation_matrix_variable(alpha, beta, sigma, sigma),
                          propagation_matrix(alpha, beta, sigma))


def test_variable_shift_row4():
    P = propagation_matrix_variable(1.0, 1.0, 0.0, 1.0)
    assert np.array_equal(P[3], [0.0, -1.0, -1.0, 1.0])
    assert np.array_equal(propagation_matrix_variable(2.0, 0.5, 0.0, 0.0),
                          propagation_matrix(2.0, 0.5, 0.0))


def test_product_identity_for_empty_window():
    hist = random_history(4, 0)
    assert np.array_equal(propagation_product(hist, 3, 2, 1.0), np.eye(4))
    assert np.array_equal(propagation_product(hist, 5, 4, 1.0), np.eye(4))


def test_product_single_factor():
    hist = random_history(4, 1)
    assert np.array_equal(
        propagation_product(hist, 2, 2, 0.7),
        propagation_matrix(hist.alphas[1], hist.betas[1], 0.7))


def test_product_matches_naive_oracle():
    hist = random_history(3, 2)
    got = propagation_product(hist, 1, 3, 0.3)
    expected = np.eye(4)
    for k in (1, 2, 3):
        expected = propagation_matrix(hist.alphas[k - 1], hist.betas[k - 1],
                                      0.3) @ expected
    scale = np.maximum(np.abs(expected), 1.0)
    assert np.all(np.abs(got - expected) <= 1e-14 * scale)


def test_product_index_errors():
    hist = random_history(3, 3)
    with pytest.raises(IndexError):
        propagation_product(hist, 1, 4, 0.0)
    with pytest.raises(IndexError):
        propagation_product(hist, 0, 2, 0.0)
    with pytest.raises(IndexError):
        amplification_factor(hist, 4, 0.0)


def test_matrix_2norm_basics():
    assert matrix_2norm(np.eye(4)) == pytest.approx(1.0, abs=1e-14)
    assert matrix_2norm(np.diag([3.0, 1.0, 1.0, 1.0])) == pytest.approx(3.0)
    assert matrix_2norm(np.zeros((4, 4))) == 0.0


@given(st.integers(0, 10**6))
def test_matrix_2norm_matches_svd(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(4, 4)) * 10.0 ** rng.integers(-6, 7)
    oracle = np.linalg.svd(M, compute_uv=False)[0]
    assert matrix_2norm(M) == pytest.approx(oracle, rel=1e-12)


def test_matrix_2norm_overflow_reports_inf():
    M = np.full((4, 4), 1e200)
    assert matrix_2norm(M) == float("inf")
    M = np.eye(4)
    M[0, 0] = float("inf")
    assert matrix_2norm(M) == float("inf")


@given(st.integers(1, 12), st.integers(0, 10**6), st.floats(0.0, 4.0))
def test_amplification_at_least_one(n, seed, sigma):
    hist = random_history(n, seed)
    assert amplification_factor(hist, n, sigma) >= 1.0


def test_amplification_consistent_with_products():
    hist = random_history(9, 5)
    for i in (1, 4, 9):
        for sigma in (0.0, 0.8):
            expect = max(matrix_2norm(propagation_product(hist, j, i, sigma))
                         for j in range(1, i + 1))
            got = amplification_factor(hist, i, sigma)
            assert got == pytest.approx(expect, rel=1e-13)


def test_single_iteration_amplification():
    hist = CoefficientHistory([0.7], [0.3])
    assert amplification_factor(hist, 1, 0.0) == pytest.approx(
        matrix_2norm(propagation_matrix(0.7, 0.3, 0.0)))


def test_select_shift_singleton_and_ties():
    hist = random_history(5, 8)
    sweep = select_shift(hist, 5, [0.75])
    assert sweep.argmin == 0.75
    assert len(sweep.psi_values) == 1
    # alpha = beta = 0 makes the matrix shift-independent: ties everywhere,
    # broken toward the smaller shift regardless of grid order
    flat = CoefficientHistory([0.0], [0.0])
    sweep = select_shift(flat, 1, [2.0, 1.0, 3.0])
    assert sweep.argmin == 1.0
    with pytest.raises(ValueError):
        select_shift(hist, 5, [])


def test_coefficient_history_validation():
    with pytest.raises(ValueError):
        CoefficientHistory([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        CoefficientHistory([1.0, float("nan")], [1.0, 1.0])


def test_modeled_evolution_zero_inputs():
    hist = random_history(6, 11)
    eps = np.zeros((6, 4))
    out = modeled_gap_evolution(hist, eps, np.zeros(4), 0.5)
    assert out.shape == (7, 4)
    assert np.all(out == 0.0)


def test_modeled_evolution_homogeneous_case():
    hist = random_history(6, 12)
    pi1 = np.array([1.0, -2.0, 0.5, 3.0])
    out = modeled_gap_evolution(hist, np.zeros((6, 4)), pi1, 0.4)
    for i in range(1, 7):
        expected = propagation_product(hist, 1, i, 0.4) @ pi1
        assert np.allclose(out[i], expected, rtol=1e-13, atol=0.0)


@pytest.mark.parametrize("absolute", [False, True])
def test_modeled_evolution_matches_unrolled_sum(absolute, rng):
    hist = random_history(5, 13)
    eps = rng.normal(size=(5, 4))
    if absolute:
        eps = np.abs(eps)
    pi1 = rng.normal(size=4)
    if absolute:
        pi1 = np.abs(pi1)
    out = modeled_gap_evolution(hist, eps, pi1, 0.7, absolute=absolute)

    def factor(k):
        P = propagation_matrix(hist.alphas[k - 1], hist.betas[k - 1], 0.7)
        return np.abs(P) if absolute else P

    for i in range(1, 6):
        acc = pi1.copy()
        rolling = [np.eye(4)]
        prods = {}
        prods[(i + 1, i)] = np.eye(4)
        for j in range(i, 0, -1):
            prods[(j, i)] = prods[(j + 1, i)] @ factor(j)
        expected = prods[(1, i)] @ pi1
        for j in range(1, i + 1):
            expected = expected + prods[(j + 1, i)] @ eps[j - 1]
        denom = np.maximum(np.abs(expected), 1e-300)
        assert np.all(np.abs(out[i] - expected) <= 1e-12 * denom + 1e-300)


def test_modeled_evolution_length_mismatch():
    hist = random_history(4, 14)
    with pytest.raises(ValueError):
        modeled_gap_evolution(hist, np.zeros((3, 4)), np.zeros(4), 0.0)


class _Rec:
    def __init__(self, alpha, beta):
        self.alpha = alpha
        self.beta = beta


def test_local_error_bounds_zero_norms():
    norms = VectorNorms(*([0.0] * 9))
    out = local_error_bounds(_Rec(1.0, 1.0), norms, 1.0, 1.0, 5, 5, 100, 1.0)
    assert all(v == 0.0 for v in out)


def test_local_error_bounds_zero_shift_residual_term():
    norms = VectorNorms(x=0.0, r=2.0, u=0.0, w=0.0, s=3.0, t=7.0, p=0.0,
                        q=0.0, z=0.0)
    out = local_error_bounds(_Rec(0.5, 0.0), norms, 1.0, 1.0, 5, 5, 100, 0.0)
    assert out.dr == pytest.approx((2.0 + 3 * 0.5 * 3.0) * UNIT_ROUNDOFF)


def test_local_error_bounds_unit_example():
    norms = VectorNorms(*([1.0] * 14))
    out = local_error_bounds(_Rec(1.0, 1.0), norms, 1.0, 1.0, 5, 5, 100, 1.0)
    # (mu sqrt(n) + mu~ sqrt(n) + 1) + 2 |beta| with all norms 1: 103 eps
    assert out.dz == pytest.approx(103.0 * UNIT_ROUNDOFF)
    assert out.dq == pytest.approx(53.0 * UNIT_ROUNDOFF)


def test_variable_bounds_shift_difference_terms():
    norms = VectorNorms(*([1.0] * 14))
    fixed = local_error_bounds_variable(_Rec(1.0, 1.0), norms, 1.0, 1.0, 5, 5,
                                        100, 1.0, 1.0)
    moved = local_error_bounds_variable(_Rec(1.0, 1.0), norms, 1.0, 1.0, 5, 5,
                                        100, 0.0, 1.0)
    assert moved.ds == pytest.approx(fixed.ds + 4.0 * UNIT_ROUNDOFF)
    assert moved.dw == pytest.approx(fixed.dw + 4.0 * UNIT_ROUNDOFF)
    assert moved.dq == pytest.approx(fixed.dq + 4.0 * UNIT_ROUNDOFF)
    assert moved.dz == pytest.approx(fixed.dz + (5.0 + 6.0) * UNIT_ROUNDOFF)


def test_gap_epsilon_bounds_composition():
    b = LocalErrorBounds(*range(1, 10))  # dx..dz = 1..9
    out = gap_epsilon_bounds(b, alpha=2.0, sigma=0.5, A_norm=3.0)
    eg = 3.0 * 4 + 0.5 * 2 + 6
    ef = 3.0 * 1 + 3 + 2.0 * eg
    ej = 3.0 * 8 + 9
    eh = 3.0 * 5 + 0.5 * 3 + 7 + 2.0 * ej + 2.0 * 0.5 * eg
    assert np.array_equal(out, [ef, eg, eh, ej])


def test_default_sigma_grid():
    A = laplacian_2d(10, 10)
    grid = default_sigma_grid(A)
    assert len(grid) == 81
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(16.0)   # 2x max row sum
    assert np.all(np.diff(grid) > 0)
    jac = make_jacobi(A)
    grid_j = default_sigma_grid(A, jac)
    assert grid_j[-1] == pytest.approx(4.0)  # 2x (row sum / diagonal)
