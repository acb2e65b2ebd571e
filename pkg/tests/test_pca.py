import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.linalg import expm

from orbitbayes import pca, trace
from orbitbayes.errors import DomainError


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_orthogonal(k, seed):
    A = np.random.default_rng(seed).standard_normal((k, k))
    return expm(A - A.T)


def test_r_frobenius():
    X = np.zeros((3, 2))
    X[0, 0], X[1, 1], X[2, 0] = 1.0, 2.0, 2.0
    assert pca.pca_r(X, np.ones(2)) == pytest.approx(3.0, rel=1e-15)


def test_r_k1():
    X = np.array([[2.0], [0.0], [0.0]])
    assert pca.pca_r(X, np.array([4.0])) == pytest.approx(1.0, rel=1e-15)


@given(st.floats(1e-3, 1e3), st.integers(0, 2 ** 32 - 1))
def test_r_scale_equivariant(g, seed):
    X = np.random.default_rng(seed).standard_normal((4, 2))
    lam = np.array([3.0, 0.5])
    assert pca.pca_r(g * X, lam) == pytest.approx(g * pca.pca_r(X, lam), rel=1e-12)


def test_lambda0_must_be_positive():
    with pytest.raises(DomainError):
        pca.check_lambda0([1.0, 0.0])


def test_orthogonality_enforced():
    with pytest.raises(DomainError):
        pca.check_orthogonal(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_gaussian_density_is_product_of_normals():
    # Lambda0 must have distinct entries, so column j has variance lambda_j.
    X = np.array([[0.3, -1.2], [0.5, 0.0], [2.0, 0.4]])
    lam = np.array([2.0, 1.0])
    params = pca.PCAParams(np.eye(2), 1.0, lam)
    val = pca.pca_sampling_density(X, params, trace.gaussian_trace(6))
    assert val == pytest.approx(np.prod(stats.norm.pdf(X, scale=np.sqrt(lam))), rel=1e-13)


def test_params_reject_tied_lambda0():
    with pytest.raises(DomainError):
        pca.PCAParams(np.eye(2), 1.0, np.ones(2))


@pytest.mark.parametrize("label", ["gaussian", "student-3", "exp-power-4"])
def test_density_sign_invariant(label):
    X = np.random.default_rng(2).standard_normal((5, 2))
    lam = np.array([3.0, 1.0])
    P = rotation(0.7)
    gen = trace.builtin_trace_generator(label, 10)
    base = pca.pca_sampling_density(X, pca.PCAParams(P, 1.3, lam), gen)
    for D in pca.sign_matrices(2):
        assert pca.pca_sampling_density(X, pca.PCAParams(P @ D, 1.3, lam), gen) == pytest.approx(
            base, rel=1e-13)


def test_density_scaling_law():
    X = np.random.default_rng(4).standard_normal((4, 3))
    lam = np.array([2.0, 1.0, 0.5])
    P = random_orthogonal(3, 5)
    gen = trace.student_trace(3.0, 12)
    g = 1.7
    lhs = pca.pca_sampling_density(g * X, pca.PCAParams(P, g, lam), gen)
    rhs = g ** -12 * pca.pca_sampling_density(X, pca.PCAParams(P, 1.0, lam), gen)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_kernel_k1():
    X = np.array([[1.0], [2.0], [2.0]])
    assert pca.pca_marginal_kernel(X, np.eye(1), np.array([2.0])) == pytest.approx(
        (9.0 / 2.0) ** -1.5, rel=1e-14)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
def test_kernel_sign_invariant(seed, k):
    r = np.random.default_rng(seed)
    X = r.standard_normal((k + 2, k))
    lam = np.sort(r.uniform(0.5, 3.0, k))[::-1]
    P = random_orthogonal(k, seed)
    base = pca.pca_marginal_kernel(X, P, lam)
    for D in pca.sign_matrices(k):
        assert pca.pca_marginal_kernel(X, P @ D, lam) == pytest.approx(base, rel=1e-12)


def test_canonicalize_identity():
    assert np.array_equal(pca.canonicalize_sign_coset(np.eye(3)).representative, np.eye(3))


def test_canonicalize_minus_identity():
    np.testing.assert_array_equal(pca.canonicalize_sign_coset(-np.eye(2)).representative, np.eye(2))


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
def test_canonical_representative_is_coset_invariant(seed, k):
    P = random_orthogonal(k, seed)
    canon = pca.canonicalize_sign_coset(P).representative
    for D in pca.sign_matrices(k):
        assert np.array_equal(pca.canonicalize_sign_coset(P @ D).representative, canon)


def test_sign_matrices_count():
    assert len(list(pca.sign_matrices(3))) == 8


def test_sampler_shape_and_determinism():
    params = pca.PCAParams(rotation(0.3), 1.5, np.array([3.0, 1.0]))
    gen = trace.gaussian_trace(10)
    a = pca.sample_pca(300, params, gen, 5, 17)
    b = pca.sample_pca(300, params, gen, 5, 17)
    assert a.draws.shape == (300, 5, 2)
    assert np.array_equal(a.draws, b.draws)


def test_gaussian_sampler_column_variances():
    lam = np.array([4.0, 1.0])
    params = pca.PCAParams(np.eye(2), 1.0, lam)
    X = pca.sample_pca(20_000, params, trace.gaussian_trace(10), 5, 31).draws
    np.testing.assert_allclose(X.var(axis=(0, 1)), lam, rtol=0.03)


def test_kernel_not_invariant_under_rotation_with_distinct_eigenvalues():
    X = np.random.default_rng(6).standard_normal((5, 2))
    lam = np.array([3.0, 1.0])
    Q = rotation(0.8)
    assert abs(pca.pca_marginal_kernel(X @ Q, np.eye(2), lam)
               / pca.pca_marginal_kernel(X, np.eye(2), lam) - 1) > 1e-3


def test_r_rotation_invariant_with_equal_eigenvalues():
    X = np.random.default_rng(6).standard_normal((5, 2))
    Q = rotation(0.8)
    assert pca.pca_r(X @ Q, np.ones(2)) == pytest.approx(pca.pca_r(X, np.ones(2)), rel=1e-14)
