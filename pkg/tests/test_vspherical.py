import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from orbitbayes import vspherical as vs
from orbitbayes.energy import energy_test
from orbitbayes.errors import DomainError, ExcludedPointError

ORIGIN2 = vs.VSphericalParams(np.zeros(2), 1.0)


def normalized(label, v, n):
    return vs.normalize_generator(vs.builtin_generator(label, n), v, n)


# v-functions

def test_elliptical_identity_is_euclidean():
    assert vs.v_elliptical(np.eye(2)).eval(np.array([3.0, 4.0])) == pytest.approx(5.0, rel=1e-15)


def test_elliptical_scaled_axis():
    assert vs.v_elliptical(np.diag([4.0, 1.0])).eval(np.array([2.0, 0.0])) == pytest.approx(1.0)


@pytest.mark.parametrize("v, x, expected", [
    (vs.v_lq(2.0), [3.0, 4.0], 5.0),
    (vs.v_lq(1.0), [3.0, -4.0], 7.0),
    (vs.v_max(), [3.0, -4.0], 4.0),
])
def test_lq_and_max(v, x, expected):
    assert v.eval(np.array(x)) == pytest.approx(expected, rel=1e-15)


def test_lq_rejects_nonpositive_q():
    with pytest.raises(DomainError):
        vs.v_lq(0.0)


@given(st.floats(0.2, 6.0), st.integers(0, 2 ** 32 - 1))
def test_lq_homogeneous(q, seed):
    x = np.random.default_rng(seed).standard_normal(4)
    v = vs.v_lq(q)
    assert v.eval(3.0 * x) == pytest.approx(3.0 * v.eval(x), rel=1e-12)


def test_homogeneity_error_elliptical(rng):
    v = vs.v_elliptical(np.array([[2.0, 0.3], [0.3, 1.0]]))
    assert vs.homogeneity_error(v, 2, rng) < 1e-12


# density

def test_gaussian_density_matches_bivariate_normal():
    v = vs.v_euclidean(2)
    f = normalized("gaussian", v, 2)
    val = vs.density(np.array([3.0, 4.0]), ORIGIN2, v, f)
    assert val == pytest.approx(math.exp(-12.5) / (2 * math.pi), rel=1e-12)


@pytest.mark.parametrize("label", ["gaussian", "exp-power-1", "exp-power-4", "student-3"])
def test_density_scale_identity(label):
    v = vs.v_lq(1.5)
    f = normalized(label, v, 2)
    mu = np.array([0.5, -1.0])
    x = np.array([1.7, 0.4])
    lhs = vs.density(x, vs.VSphericalParams(mu, 2.0), v, f)
    rhs = 2.0 ** -2 * vs.density((x - mu) / 2.0, ORIGIN2, v, f)
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_density_at_location_is_excluded():
    v = vs.v_euclidean(2)
    with pytest.raises(ExcludedPointError):
        vs.density(np.zeros(2), ORIGIN2, v, normalized("gaussian", v, 2))


def test_elliptical_constant_two_dimensions():
    assert vs.elliptical_constant(np.eye(2)) == pytest.approx(1 / (2 * math.pi), rel=1e-15)


# sampler

def test_empty_sample():
    v = vs.v_euclidean(2)
    assert vs.sample(0, ORIGIN2, v, normalized("gaussian", v, 2), 1).draws.shape == (0, 2)


def test_gaussian_sampler_moments():
    v = vs.v_euclidean(3)
    b = vs.sample(100_000, vs.VSphericalParams(np.zeros(3), 1.0), v, normalized("gaussian", v, 3), 11)
    np.testing.assert_allclose(b.draws.mean(axis=0), 0.0, atol=0.02)
    np.testing.assert_allclose(np.cov(b.draws.T), np.eye(3), atol=0.03)


def test_elliptical_gaussian_sampler_matches_normal_oracle():
    S = np.array([[4.0, 1.0, 0.0], [1.0, 1.0, 0.2], [0.0, 0.2, 0.5]])
    v = vs.v_elliptical(S)
    b = vs.sample(10_000, vs.VSphericalParams(np.zeros(3), 1.0), v, normalized("gaussian", v, 3), 12)
    ref = np.random.default_rng(13).multivariate_normal(np.zeros(3), S, 10_000)
    res = energy_test(b.draws, ref, np.random.default_rng(14), permutations=199)
    assert res.pvalue > 0.01


def test_radius_follows_radial_cdf():
    S = np.diag([4.0, 1.0, 0.5])
    v = vs.v_elliptical(S)
    f = normalized("student-3", v, 3)
    mu = np.array([1.0, 2.0, 3.0])
    b = vs.sample(2000, vs.VSphericalParams(mu, 2.0), v, f, 5)
    r = v.eval(b.draws - mu) / 2.0
    assert stats.kstest(r, lambda t: vs.radial_cdf(f, 3, t)).pvalue > 0.01


def test_sampler_is_deterministic():
    v = vs.v_lq(1.0)
    f = normalized("exp-power-4", v, 2)
    a = vs.sample(500, ORIGIN2, v, f, 99).draws
    b = vs.sample(500, ORIGIN2, v, f, 99).draws
    assert np.array_equal(a, b)


# direction and cross-section densities

def test_euclidean_direction_density_is_uniform():
    v = vs.v_euclidean(3)
    c = 1 / (4 * math.pi)
    u = np.array([0.0, 0.6, 0.8])
    assert vs.direction_density(u, v, c) == pytest.approx(c, rel=1e-15)


def test_elliptical_direction_density_value():
    S = np.diag([4.0, 1.0])
    val = vs.direction_density(np.array([1.0, 0.0]), vs.v_elliptical(S), vs.elliptical_constant(S))
    assert val == pytest.approx(1 / math.pi, rel=1e-14)


def test_elliptical_cross_section_value():
    S = np.diag([4.0, 1.0])
    val = vs.star_cross_section_density(np.array([2.0, 0.0]), vs.v_elliptical(S),
                                        vs.elliptical_constant(S))
    assert val == pytest.approx(1 / (2 * math.pi), rel=1e-14)


# regression residual direction

def test_residual_direction_drops_fitted_part():
    X = np.eye(3)[:, :1]
    out = vs.regression_residual_direction(np.array([5.0, 3.0, 4.0]), X)
    np.testing.assert_allclose(out, [0.0, 0.6, 0.8], atol=1e-15)


def test_residual_direction_zero_residual():
    X = np.column_stack([np.ones(4), np.arange(4.0)])
    out = vs.regression_residual_direction(X @ np.array([1.0, 2.0]), X)
    assert np.array_equal(out, np.zeros(4))


@given(st.floats(0.01, 100.0), st.integers(0, 2 ** 32 - 1))
def test_residual_direction_invariance(g, seed):
    r = np.random.default_rng(seed)
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    y = r.standard_normal(6)
    beta = r.standard_normal(2)
    base = vs.regression_residual_direction(y, X)
    moved = vs.regression_residual_direction(g * y + X @ beta, X)
    np.testing.assert_allclose(moved, base, atol=1e-10)


# marginal kernel

def test_marginal_kernel_invariant_prior():
    v = vs.v_euclidean(2)
    assert vs.vspherical_marginal_kernel(np.array([3.0, 4.0]), np.zeros(2), v) == pytest.approx(1 / 25)


def test_marginal_kernel_power_prior():
    v = vs.v_euclidean(2)
    val = vs.vspherical_marginal_kernel(np.array([3.0, 4.0]), np.zeros(2), v, a=1.0)
    assert val == pytest.approx(0.2)


@pytest.mark.parametrize("v, n", [
    (vs.v_lq(1.5), 2),
    (vs.v_max(), 2),
    (vs.v_elliptical(np.diag([4.0, 1.0, 0.5])), 3),
])
def test_cross_section_mass_quadrature_matches_ball_volume(v, n):
    quad = vs.cross_section_mass(v, n, method="quadrature")
    assert quad == pytest.approx(vs.cross_section_mass(v, n, method="closed"), rel=1e-8)


@pytest.mark.parametrize("v", [
    vs.v_euclidean(3), vs.v_elliptical(np.diag([4.0, 1.0, 0.5])), vs.v_lq(0.7), vs.v_lq(1.0),
    vs.v_lq(3.0), vs.v_max(),
], ids=lambda v: v.label)
def test_builtin_v_functions_homogeneous(v, rng):
    assert vs.homogeneity_error(v, 3, rng, trials=1000) < 1e-10


def test_direction_density_integrates_to_one_in_three_dimensions():
    from orbitbayes.numerics import sphere_integral

    S = np.diag([4.0, 1.0, 0.5])
    v = vs.v_elliptical(S)
    c = vs.elliptical_constant(S)
    res = sphere_integral(lambda u: vs.direction_density(u, v, c), 3)
    assert res.value == pytest.approx(1.0, rel=1e-6)
