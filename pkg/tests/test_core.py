import math

import numpy as np
import pytest
from scipy import integrate, stats
from hypothesis import given, strategies as st

from orbitbayes import affine, pca, trace
from orbitbayes import vspherical as vs
from orbitbayes.core import (
    ParamPoint, cross_section_density, marginal_kernel, normalizing_constant, power_multiplier,
    sampling_density,
)
from orbitbayes.errors import ExcludedPointError
from orbitbayes.numerics import multivariate_gamma, sphere_surface_area

V2 = vs.v_euclidean(2)
GAUSS2 = vs.normalize_generator(vs.gaussian(2), V2, 2)


def vs_model(deco="v"):
    return vs.make_model(V2, 2, deco)


def models():
    S = np.diag([4.0, 1.0, 0.5])
    v = vs.v_elliptical(S)
    out = [vs.make_model(v, 3, "v"), vs.make_model(v, 3, "norm")]
    out.append(affine.make_model(4, 2, np.diag([1.0, 2.0, 0.5, 1.5])))
    out.append(pca.make_model(5, 2, np.array([3.0, 1.0])))
    return out


MODELS = models()


def test_sampling_density_standard_normal():
    val = sampling_density(vs_model(), np.array([3.0, 4.0]), ParamPoint(np.zeros(2), 1.0), GAUSS2)
    assert val == pytest.approx(math.exp(-12.5) / (2 * math.pi), rel=1e-13)


def test_sampling_density_at_identity_is_generator_value():
    # r(x) = 1 and s = 1, so every multiplier is one
    x = np.array([0.6, 0.8])
    val = sampling_density(vs_model(), x, ParamPoint(np.zeros(2), 1.0), GAUSS2)
    assert val == pytest.approx(float(GAUSS2.eval(1.0)), rel=1e-15)


def test_sampling_density_excludes_location():
    with pytest.raises(ExcludedPointError):
        sampling_density(vs_model(), np.zeros(2), ParamPoint(np.zeros(2), 1.0), GAUSS2)


@pytest.mark.parametrize("S", [np.eye(2), np.diag([4.0, 1.0]), np.diag([4.0, 1.0, 0.5])])
def test_elliptical_normalizing_constant(S):
    n = len(S)
    v = vs.v_elliptical(S)
    f = vs.normalize_generator(vs.gaussian(n), v, n)
    c = normalizing_constant(vs.make_model(v, n), f).value
    expected = 1 / (sphere_surface_area(n) * math.sqrt(np.linalg.det(S)))
    assert c == pytest.approx(expected, rel=1e-8)


def test_standard_normal_constant_two_dimensions():
    assert normalizing_constant(vs_model(), GAUSS2).value == pytest.approx(1 / (2 * math.pi), rel=1e-8)


def test_affine_normalizing_constant_by_importance_sampling():
    n, k = 4, 2
    S = np.diag([1.0, 2.0, 0.5, 1.5])
    f = affine.group_generator(trace.gaussian_trace(n * k), S)
    res = normalizing_constant(affine.make_model(n, k, S), f, rng=np.random.default_rng(6),
                               draws=400_000)
    exact = (multivariate_gamma(k, n / 2)
             / (math.pi ** (k * (n - k) / 2) * np.linalg.det(S) ** (k / 2)
                * multivariate_gamma(k, k / 2)))
    assert res.value == pytest.approx(exact, rel=max(4 * res.error / res.value, 1e-3))


def test_cross_section_density_constant_for_v_decomposition():
    assert cross_section_density(vs_model("v"), np.array([0.6, 0.8]), 0.25) == 0.25


def test_cross_section_density_star_form():
    S = np.diag([4.0, 1.0])
    v = vs.v_elliptical(S)
    model = vs.make_model(v, 2, "norm")
    u = np.array([math.cos(0.4), math.sin(0.4)])
    c = vs.elliptical_constant(S)
    assert cross_section_density(model, u, c) == pytest.approx(c * v.eval(u) ** -2, rel=1e-14)


def test_marginal_kernel_matches_vspherical_closed_form():
    x, mu = np.array([3.0, 4.0]), np.zeros(2)
    assert marginal_kernel(vs_model(), x, mu) == pytest.approx(1 / 25, rel=1e-14)
    assert marginal_kernel(vs_model(), x, mu, power_multiplier(1.0)) == pytest.approx(0.2, rel=1e-14)


def test_marginal_kernel_matches_pca_closed_form():
    lam = np.array([3.0, 1.0])
    model = pca.make_model(5, 2, lam)
    X = np.random.default_rng(1).standard_normal((5, 2))
    c, s = math.cos(0.9), math.sin(0.9)
    P = np.array([[c, -s], [s, c]])
    assert marginal_kernel(model, X, P) == pytest.approx(pca.pca_marginal_kernel(X, P, lam), rel=1e-12)


@given(st.floats(-3.0, 3.0), st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_power_multiplier_is_a_homomorphism(a, g1, g2):
    m = power_multiplier(a)
    assert float(m(g1 * g2)) == pytest.approx(float(m(g1)) * float(m(g2)), rel=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_orbit_decomposition_laws(model, seed):
    r = np.random.default_rng(seed)
    x = model.random_point(r)
    g = model.random_g(r)
    gx = model.g_action(g, x)
    np.testing.assert_allclose(model.r(gx), model.g_mul(g, model.r(x)), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(model.z(gx), model.z(x), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(model.g_action(model.r(x), model.z(x)), x, rtol=1e-10, atol=1e-12)


def test_pca_framework_density_identity():
    lam = np.array([3.0, 1.0])
    model = pca.make_model(5, 2, lam)
    gen = trace.student_trace(3.0, 10)
    f = pca.group_generator(gen, lam, 5)
    r = np.random.default_rng(9)
    for _ in range(50):
        X = r.standard_normal((5, 2))
        P = model.random_h(r)
        g = float(np.exp(r.uniform(-1, 1)))
        direct = pca.pca_sampling_density(X, pca.PCAParams(P, g, lam), gen)
        framework = sampling_density(model, X, ParamPoint(P, g), f)
        assert framework == pytest.approx(direct, rel=1e-12)


def _t_mass(model, f, theta, scale, seed, draws=20_000):
    # importance sampling with a multivariate t (df 1) proposal
    prop = stats.multivariate_t(np.zeros(len(scale)), np.diag(scale), df=1, seed=seed)
    Y = prop.rvs(draws)
    w = np.array([sampling_density(model, y.reshape(model.point_shape), theta, f) for y in Y])
    w = w / prop.pdf(Y)
    return w.mean(), w.std() / math.sqrt(draws)


def test_vspherical_density_integrates_to_one():
    S = np.diag([4.0, 1.0])
    v = vs.v_elliptical(S)
    model = vs.make_model(v, 2)
    for label in ("gaussian", "student-3", "exp-power-4"):
        f = vs.normalize_generator(vs.builtin_generator(label, 2), v, 2)
        theta = ParamPoint(np.array([0.3, -0.2]), 1.5)
        dens = lambda y, x: sampling_density(model, np.array([x, y]), theta, f)
        total = sum(integrate.dblquad(dens, a, b, c, d, epsabs=1e-10)[0]
                    for a, b in ((-np.inf, 0.3), (0.3, np.inf))
                    for c, d in ((-np.inf, -0.2), (-0.2, np.inf)))
        assert total == pytest.approx(1.0, rel=1e-2), label


def test_affine_density_integrates_to_one():
    n, k = 4, 2
    S = np.diag([1.0, 2.0, 0.5, 1.5])
    model = affine.make_model(n, k, S)
    theta = ParamPoint(np.zeros((n, k)), np.eye(k))
    for gen in (trace.gaussian_trace(n * k), trace.student_trace(3.0, n * k)):
        f = affine.group_generator(gen, S)
        mass, err = _t_mass(model, f, theta, np.kron(np.diag(S), np.ones(k)), 3)
        assert mass == pytest.approx(1.0, rel=max(1e-2, 4 * err)), gen.label


def test_pca_density_integrates_to_one():
    lam = np.array([3.0, 1.0])
    model = pca.make_model(5, 2, lam)
    theta = ParamPoint(np.eye(2), 1.3)
    for gen in (trace.gaussian_trace(10), trace.student_trace(3.0, 10)):
        f = pca.group_generator(gen, lam, 5)
        mass, err = _t_mass(model, f, theta, 1.69 * np.tile(lam, 5), 4)
        assert mass == pytest.approx(1.0, rel=max(1e-2, 4 * err)), gen.label


def test_group_integral_constant_matches_cross_section_mass():
    for S in (np.diag([4.0, 1.0]), np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 0.7]])):
        n = len(S)
        v = vs.v_elliptical(S)
        f = vs.normalize_generator(vs.gaussian(n), v, n)
        c = normalizing_constant(vs.make_model(v, n), f).value
        mass = vs.cross_section_mass(v, n, method="quadrature")
        assert c == pytest.approx(1 / mass, rel=1e-6)


@pytest.mark.parametrize("model", MODELS[::2] + MODELS[3:], ids=lambda m: m.label)
def test_marginal_kernel_scales_with_chi(model):
    r = np.random.default_rng(21)
    x = model.random_point(r)
    for _ in range(5):
        g = model.random_g(r)
        lhs = marginal_kernel(model, model.g_action(g, x), model.h_identity)
        rhs = marginal_kernel(model, x, model.h_identity) / float(model.chi_G(g))
        assert lhs == pytest.approx(rhs, rel=1e-10)
