import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairgfe.errors import DataError, NumericalError
from fairgfe.kernel_constrained import (
    KernelFunction,
    QuadratureConstraint,
    augmented_gram,
    condition_on_observations,
    empirical_quadrature_row,
    fit,
    gaussian_difference_covariance,
    gaussian_example_matrix,
    group_mean_gap,
    predict,
    quadrature_self_term,
)

SE = KernelFunction("squared-exponential", lengthscale=1.0)


def test_quadrature_row_identical_samples_is_zero():
    A = np.array([[0.0, 1.0], [2.0, 3.0]])
    row = empirical_quadrature_row(SE, QuadratureConstraint(A, A), np.random.default_rng(0).normal(size=(5, 2)))
    np.testing.assert_array_equal(row, np.zeros(5))


def test_quadrature_row_linear_kernel():
    row = empirical_quadrature_row(KernelFunction("linear"), QuadratureConstraint([[2.0]], [[0.0]]), [[1.0], [3.0]])
    np.testing.assert_allclose(row, [2.0, 6.0])


def test_quadrature_row_single_equal_points():
    row = empirical_quadrature_row(SE, QuadratureConstraint([[0.7]], [[0.7]]), [[0.0], [1.0], [5.0]])
    np.testing.assert_array_equal(row, [0.0, 0.0, 0.0])


def test_quadrature_row_is_brute_force_average(rng):
    A, B, X = rng.normal(size=(4, 2)), rng.normal(size=(3, 2)), rng.normal(size=(6, 2))
    k = lambda u, v: np.exp(-np.sum((u - v) ** 2) / 2)
    expect = [np.mean([k(a, x) for a in A]) - np.mean([k(b, x) for b in B]) for x in X]
    np.testing.assert_allclose(empirical_quadrature_row(SE, QuadratureConstraint(A, B), X), expect, rtol=1e-12)


def test_self_term_symmetric_and_psd(rng):
    cons = [QuadratureConstraint(rng.normal(size=(5, 2)), rng.normal(size=(4, 2)) + 1) for _ in range(4)]
    S = np.array([[quadrature_self_term(SE, a, b) for b in cons] for a in cons])
    np.testing.assert_allclose(S, S.T, atol=1e-15)
    assert np.linalg.eigvalsh(S).min() >= -1e-12


def test_empty_samples_rejected():
    with pytest.raises(DataError):
        QuadratureConstraint(np.zeros((0, 2)), [[1.0, 2.0]])
    with pytest.raises(NumericalError):
        QuadratureConstraint([[np.nan]], [[1.0]])


def test_augmented_gram_symmetric(rng):
    X = rng.normal(size=(8, 2))
    cons = [QuadratureConstraint(X[:3], X[3:6]), QuadratureConstraint(X[:4], X[4:])]
    G = augmented_gram(SE, X, 0.1, cons)
    assert G.shape == (10, 10)
    np.testing.assert_array_equal(G, G.T)
    np.testing.assert_allclose(np.diag(G)[:8], 1.1)


def test_no_constraint_interpolation():
    system = fit([[0.0]], [1.0], SE)
    assert predict(system, [[0.0]])[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("family", ["squared-exponential", "linear", "polynomial"])
def test_constraint_holds_after_fit(rng, family):
    X = rng.normal(size=(60, 2))
    y = 3 * X[:, 0] + rng.normal(size=60)
    A, B = X[X[:, 1] > 0], X[X[:, 1] <= 0]
    con = QuadratureConstraint(A, B)
    kf = KernelFunction(family, lengthscale=1.5)
    free = fit(X, y, kf, 0.1)
    fair = fit(X, y, kf, 0.1, [con])
    assert abs(group_mean_gap(free, con)) > 1e-3
    assert abs(group_mean_gap(fair, con)) <= 1e-8 * np.abs(y).max()


def test_centering_keeps_gap_closed(rng):
    X = rng.normal(size=(40, 1))
    y = 100 + X[:, 0]
    con = QuadratureConstraint(X[:20], X[20:])
    system = fit(X, y, SE, 0.05, [con], center=True)
    assert abs(group_mean_gap(system, con)) <= 1e-8 * 100


def test_dependent_constraints_fall_back_to_min_norm(rng):
    X = rng.normal(size=(30, 1))
    con = QuadratureConstraint(X[:10], X[10:])
    system = fit(X, X[:, 0], SE, 0.1, [con, con])
    assert abs(group_mean_gap(system, con)) <= 1e-8


def test_matches_kernel_ridge_without_constraints(rng):
    KernelRidge = pytest.importorskip("sklearn.kernel_ridge").KernelRidge
    X = rng.normal(size=(50, 2))
    y = np.sin(X[:, 0]) + X[:, 1]
    ell, s2 = 0.8, 0.3
    ours = predict(fit(X, y, KernelFunction(lengthscale=ell), s2), X)
    ref = KernelRidge(alpha=s2, kernel="rbf", gamma=1 / (2 * ell**2)).fit(X, y).predict(X)
    np.testing.assert_allclose(ours, ref, atol=1e-10)


# --- the three-variable Gaussian ---------------------------------------------------

def test_example_matrix_unit_case():
    M = gaussian_example_matrix(1, 1, 0, 0)
    np.testing.assert_array_equal(M, [[2, 1, 1], [1, 1, 0], [1, 0, 1]])
    assert abs(np.linalg.det(M)) <= 1e-12


def test_example_matrix_perfect_correlation():
    assert gaussian_example_matrix(1, 1, 1, 0)[0, 0] == 0


def test_example_matrix_substitution():
    np.testing.assert_array_equal(gaussian_example_matrix(1, 2, 0, 0.5), [[5, 1, 4], [1, 1.5, 0], [4, 0, 4.5]])


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(-0.99, 0.99))
def test_difference_covariance_rank_two_and_psd(sa, sb, rho):
    M = gaussian_difference_covariance(sa, sb, rho, 0.0)
    s = np.linalg.svd(M, compute_uv=False)
    assert s[-1] <= 1e-10 * s[0]
    assert np.linalg.eigvalsh(M).min() >= -1e-10 * s[0]
    # direct construction from d = a - b
    cov_ab = np.array([[sa**2, rho * sa * sb], [rho * sa * sb, sb**2]])
    T = np.array([[1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(M, T @ cov_ab @ T.T, atol=1e-12)


def test_example_matrix_is_not_always_a_covariance():
    # in its reference form the border sign makes some parameter choices indefinite
    assert np.linalg.eigvalsh(gaussian_example_matrix(2, 1, -0.3, 0.0)).min() < 0


@pytest.mark.parametrize("sa, sb, rho, sn2", [(1, 1, 0, 0.1), (2, 1, -0.3, 0.5), (0.5, 1.5, 0.7, 1.0)])
def test_conditioning_forces_equal_means(sa, sb, rho, sn2):
    cov = gaussian_difference_covariance(sa, sb, rho, sn2)
    post = condition_on_observations(cov, sn2, [0.0, 1.3, -0.4])
    assert post[0] == pytest.approx(0.0, abs=1e-10)
    assert post[1] - post[2] == pytest.approx(0.0, abs=1e-10)
