"""v-spherical (star-shaped) distributions on R^n.

Density sigma^{-n} f(v((x - mu) / sigma)) for a positively homogeneous
``v``.  The family fits the orbital framework with H = R^n acting by
translation and G = R_{>0} acting by scaling, in two ways:

* ``decomposition="v"``:    r(x) = v(x), s = 1, cross section {v = 1};
* ``decomposition="norm"``: r(x) = ||x||, s(z) = v(z), cross section S^{n-1}.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize
from scipy.linalg import qr

from .batch import SampleBatch, SeedLike, make_rng
from .core import DensityGenerator, OrbitalModel, POSITIVE_REALS
from .errors import (
    DomainError,
    EnvelopeError,
    ExcludedPointError,
    NonDifferentiableError,
    RankDeficientError,
    SamplerStallError,
)
from .numerics import (
    QuadratureSpec,
    as_posdef,
    cholesky_sqrt,
    gamma,
    integrate_interval,
    integrate_radial,
    sphere_integral,
    sphere_surface_area,
)

PIECEWISE_C1 = "piecewise-C1"
GENERAL = "general"

ENVELOPE_STARTS = 200
ENVELOPE_SAFETY = 1.05
MIN_ACCEPTANCE = 1e-4
FD_STEP = 1e-6


# ---------------------------------------------------------------------------
# v-functions


@dataclass(frozen=True)
class VFunction:
    """Positively homogeneous gauge v: R^n \\ {0} -> R_{>0}.

    ``eval`` maps an array of shape (..., n) to shape (...).  ``ball_volume``
    (if known) gives the Lebesgue volume of {v <= 1} in dimension n.
    """

    eval: Callable
    label: str
    smoothness: str = PIECEWISE_C1
    dim: Optional[int] = None
    grad: Optional[Callable] = None
    ball_volume: Optional[Callable] = None
    euclidean: bool = False
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def check_dim(self, n: int):
        if self.dim is not None and self.dim != n:
            raise DomainError(f"{self.label} is defined on R^{self.dim}, not R^{n}")


def v_euclidean(n: Optional[int] = None) -> VFunction:
    return VFunction(
        eval=lambda x: np.sqrt(np.einsum("...i,...i->...", x, x)),
        label="euclidean",
        dim=n,
        grad=lambda x: x / np.linalg.norm(x, axis=-1, keepdims=True),
        ball_volume=lambda m: math.pi ** (m / 2) / float(gamma(m / 2 + 1)),
        euclidean=True,
    )


def v_elliptical(Sigma0) -> VFunction:
    """v(x) = (x^T Sigma0^{-1} x)^{1/2}."""
    S = as_posdef(Sigma0)
    n = S.shape[0]
    T = cholesky_sqrt(S)
    Tinv = np.linalg.inv(T)
    Sinv = Tinv.T @ Tinv
    sqrt_det = float(np.prod(np.diag(T)))

    def ev(x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != n:
            raise DomainError(f"expected vectors of length {n}, got {x.shape[-1]}")
        w = x @ Tinv.T
        return np.sqrt(np.einsum("...i,...i->...", w, w))

    def gr(x):
        return (x @ Sinv) / ev(x)[..., None]

    return VFunction(
        eval=ev,
        label=f"elliptical(n={n})",
        dim=n,
        grad=gr,
        ball_volume=lambda m: math.pi ** (m / 2) / float(gamma(m / 2 + 1)) * sqrt_det,
    )


def v_lq(q: float) -> VFunction:
    """v(x) = (sum |x_i|^q)^{1/q}."""
    if not q > 0:
        raise DomainError(f"q must be positive, got {q!r}")
    if math.isinf(q):
        return v_max()
    q = float(q)

    def ev(x):
        x = np.abs(np.asarray(x, dtype=float))
        scale = x.max(axis=-1)
        safe = np.where(scale > 0, scale, 1.0)
        return scale * (((x / safe[..., None]) ** q).sum(axis=-1)) ** (1.0 / q)

    def lq_grad(x):
        x = np.asarray(x, dtype=float)
        v = ev(x)[..., None]
        return np.sign(x) * (np.abs(x) / v) ** (q - 1)

    return VFunction(
        eval=ev,
        label=f"lq(q={q:g})",
        smoothness=PIECEWISE_C1 if q >= 1 else GENERAL,
        grad=lq_grad if q > 1 else None,
        ball_volume=lambda m: (2 * float(gamma(1 + 1 / q))) ** m / float(gamma(1 + m / q)),
    )


def v_max() -> VFunction:
    """The l_infinity gauge max_i |x_i|."""
    return VFunction(
        eval=lambda x: np.abs(np.asarray(x, dtype=float)).max(axis=-1),
        label="lq(q=inf)",
        ball_volume=lambda m: 2.0 ** m,
    )


def homogeneity_error(v: VFunction, n: int, rng: np.random.Generator, trials: int = 1000) -> float:
    """Largest relative deviation |v(gx) - g v(x)| / (g v(x)) over random (g, x)."""
    x = rng.standard_normal((trials, n)) * np.exp(rng.normal(0, 2, (trials, 1)))
    g = np.exp(rng.uniform(-5, 5, trials))
    lhs = v(g[:, None] * x)
    rhs = g * v(x)
    return float(np.max(np.abs(lhs - rhs) / rhs))


# ---------------------------------------------------------------------------
# radial generators


@dataclass(frozen=True)
class RadialGenerator(DensityGenerator):
    """A density generator on G = R_{>0}, restricted to dimension ``dim``.

    ``sample_radius(rng, size)`` draws from the density proportional to
    f(r) r^{dim-1}; ``scale`` is the factor already folded into ``eval`` by
    :func:`normalize_generator`.
    """

    dim: int = 1
    sample_radius: Optional[Callable] = None
    scale: float = 1.0


def gaussian(n: int) -> RadialGenerator:
    return RadialGenerator(
        eval=lambda r: np.exp(-0.5 * np.square(r)),
        label="gaussian",
        dim=n,
        sample_radius=lambda rng, size: np.sqrt(rng.chisquare(n, size)),
    )


def exp_power(q: float, n: int) -> RadialGenerator:
    """f(r) = exp(-r^q / q); r^q / q is Gamma(n/q) distributed under r^{n-1} f(r)."""
    if not q > 0:
        raise DomainError("exponential-power index must be positive")
    return RadialGenerator(
        eval=lambda r: np.exp(-np.power(r, q) / q),
        label=f"exp-power(q={q:g})",
        dim=n,
        sample_radius=lambda rng, size: (q * rng.gamma(n / q, 1.0, size)) ** (1.0 / q),
    )


def student(d: float, n: int) -> RadialGenerator:
    """f(r) = (1 + r^2/d)^{-(n+d)/2}, the multivariate t radial profile."""
    if not d > 0:
        raise DomainError("degrees of freedom must be positive")

    def radius(rng, size):
        z = np.sqrt(rng.chisquare(n, size))
        w = rng.chisquare(d, size)
        return z / np.sqrt(w / d)

    return RadialGenerator(
        eval=lambda r: np.power(1.0 + np.square(r) / d, -(n + d) / 2),
        label=f"student(d={d:g})",
        dim=n,
        sample_radius=radius,
    )


BUILTIN_GENERATORS = {
    "gaussian": lambda n: gaussian(n),
    "exp-power-1": lambda n: exp_power(1.0, n),
    "exp-power-4": lambda n: exp_power(4.0, n),
    "student-3": lambda n: student(3.0, n),
}


def builtin_generator(label: str, n: int) -> RadialGenerator:
    try:
        return BUILTIN_GENERATORS[label](n)
    except KeyError:
        raise DomainError(f"unknown generator {label!r}; choose from {sorted(BUILTIN_GENERATORS)}") from None


def radial_mass(f: RadialGenerator, n: Optional[int] = None,
                spec: QuadratureSpec = QuadratureSpec(rtol=1e-10)) -> float:
    """int_0^inf f(r) r^{n-1} dr by quadrature."""
    return integrate_radial(f.eval, f.dim if n is None else n, spec).value


def cross_section_mass(v: VFunction, n: int, spec: QuadratureSpec = QuadratureSpec(rtol=1e-10),
                       method: str = "auto") -> float:
    """nu_Z(Z) = int_{S^{n-1}} v(u)^{-n} lambda(du) = n vol{v <= 1}.

    ``auto`` uses the closed-form ball volume when the v-function has one and
    integrates over the sphere numerically (n <= 3) otherwise.
    """
    v.check_dim(n)
    if method == "auto":
        method = "closed" if v.ball_volume is not None else "quadrature"
    if method == "quadrature":
        return sphere_integral(lambda u: v(u) ** (-float(n)), n, spec).value
    if method == "closed":
        if v.ball_volume is None:
            raise DomainError(f"no closed-form ball volume for {v.label}; use n <= 3")
        return n * v.ball_volume(n)
    raise DomainError(f"unknown method {method!r}")


def normalize_generator(f: RadialGenerator, v: VFunction, n: Optional[int] = None,
                        mass: Optional[float] = None) -> RadialGenerator:
    """Rescale f so that sigma^{-n} f(v(.)) integrates to one over R^n."""
    n = f.dim if n is None else n
    if mass is None:
        mass = cross_section_mass(v, n)
    scale = 1.0 / (radial_mass(f, n) * mass)
    raw = f.eval
    return dataclasses.replace(f, eval=lambda r: scale * raw(r), scale=f.scale * scale)


def tabulated_radius_sampler(f: RadialGenerator, n: int, points: int = 20001,
                             half_width: float = 30.0) -> Callable:
    """Inverse-CDF sampler for r^{n-1} f(r) from a trapezoid table in log r."""
    u = np.linspace(-half_width, half_width, points)
    with np.errstate(all="ignore"):
        dens = np.nan_to_num(np.asarray(f.eval(np.exp(u)), dtype=float) * np.exp(n * u))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(u))])
    cdf /= cdf[-1]

    def radius(rng, size):
        return np.exp(np.interp(rng.uniform(size=size), cdf, u))

    return radius


# ---------------------------------------------------------------------------
# densities


def _as_params(mu, sigma, n=None):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if n is not None and mu.shape != (n,):
        raise DomainError(f"location must have shape ({n},), got {mu.shape}")
    if not (np.isfinite(sigma) and sigma > 0):
        raise DomainError(f"scale must be positive, got {sigma!r}")
    return mu, float(sigma)


@dataclass(frozen=True)
class VSphericalParams:
    mu: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        mu, sigma = _as_params(self.mu, self.sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.mu.shape[0]


def density(x, params: VSphericalParams, v: VFunction, f: DensityGenerator):
    """sigma^{-n} f(v((x - mu) / sigma)); ``f`` should already be normalised."""
    x = np.asarray(x, dtype=float)
    n = params.n
    if x.shape[-1] != n:
        raise DomainError(f"expected points in R^{n}")
    d = (x - params.mu) / params.sigma
    if np.any(np.all(d == 0, axis=-1)):
        raise ExcludedPointError("density is undefined at x = mu")
    return params.sigma ** (-n) * f.eval(v(d))


def direction_envelope(v: VFunction, n: int, rng: Optional[np.random.Generator] = None) -> float:
    """sup_{u in S^{n-1}} v(u)^{-n}, by multistart local minimisation of v on the sphere."""
    key = ("envelope", n)
    if key in v._cache:
        return v._cache[key]
    if v.euclidean:
        v._cache[key] = 1.0
        return 1.0
    rng = np.random.default_rng(12345) if rng is None else rng
    starts = rng.standard_normal((ENVELOPE_STARTS, n))
    starts = np.concatenate([starts, np.eye(n), -np.eye(n)])
    starts /= np.linalg.norm(starts, axis=1, keepdims=True)

    def on_sphere(w):
        nw = np.linalg.norm(w)
        if nw == 0:
            return np.inf
        return float(v(w / nw))

    best = float(np.min(v(starts)))
    # local descent only from the most promising starts; the rest are covered by the scan
    order = np.argsort(v(starts))[:ENVELOPE_STARTS]
    for w0 in starts[order]:
        res = optimize.minimize(on_sphere, w0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        best = min(best, float(res.fun))
    env = best ** (-n)
    v._cache[key] = env
    return env


def sample_directions(v: VFunction, n: int, count: int, rng: np.random.Generator):
    """Draw u on S^{n-1} with density proportional to v(u)^{-n}; returns (u, acceptance)."""
    v.check_dim(n)
    if count == 0:
        return np.empty((0, n)), 1.0
    if v.euclidean:
        g = rng.standard_normal((count, n))
        return g / np.linalg.norm(g, axis=1, keepdims=True), 1.0
    M = direction_envelope(v, n) * ENVELOPE_SAFETY
    out = []
    have = proposed = 0
    accept_est = 0.5
    while have < count:
        m = int(min(max(64, 1.2 * (count - have) / accept_est), 2_000_000))
        g = rng.standard_normal((m, n))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
        ratio = v(u) ** (-float(n)) / M
        if np.any(ratio > 1.0):
            raise EnvelopeError(
                f"direction envelope for {v.label} too small (ratio {ratio.max():.6f})"
            )
        keep = rng.uniform(size=m) < ratio
        out.append(u[keep])
        have += int(keep.sum())
        proposed += m
        accept_est = max(have / proposed, MIN_ACCEPTANCE)
        if proposed >= 10_000 and have / proposed < MIN_ACCEPTANCE:
            raise SamplerStallError(
                f"direction acceptance {have / proposed:.2e} below {MIN_ACCEPTANCE}"
            )
    return np.concatenate(out)[:count], have / proposed


def _radius_sampler(f: RadialGenerator, n: int) -> Callable:
    if f.sample_radius is not None and f.dim == n:
        return f.sample_radius
    return tabulated_radius_sampler(f, n)


def _draw(count, mu, sigma, v, f, rng):
    n = mu.shape[0]
    u, acc = sample_directions(v, n, count, rng)
    z = u / v(u)[:, None]
    radius = _radius_sampler(f, n)(rng, count)
    resampled = 0
    bad = ~(radius > 0)
    while np.any(bad):
        resampled += int(bad.sum())
        radius[bad] = _radius_sampler(f, n)(rng, int(bad.sum()))
        bad = ~(radius > 0)
    x = mu + sigma * radius[:, None] * z
    return x, acc, resampled


def sample(count: int, params: VSphericalParams, v: VFunction, f: RadialGenerator,
           rng: SeedLike, shards: int = 1) -> SampleBatch:
    """Exact draws: direction u ~ v(u)^{-n}, z = u / v(u), radius ~ f(r) r^{n-1}, x = mu + sigma r z.

    With ``shards > 1`` each shard uses an independent child stream spawned
    from the seed and shards are concatenated in index order.
    """
    if count < 0:
        raise DomainError("count must be nonnegative")
    gen, seed = make_rng(rng)
    n = params.n
    v.check_dim(n)
    if shards > 1:
        children = gen.spawn(shards)
        sizes = [count // shards + (1 if i < count % shards else 0) for i in range(shards)]
        parts = [_draw(m, params.mu, params.sigma, v, f, c) for m, c in zip(sizes, children)]
        x = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, n))
        acc = float(np.mean([p[1] for p in parts]))
        resampled = sum(p[2] for p in parts)
    else:
        x, acc, resampled = _draw(count, params.mu, params.sigma, v, f, gen)
    if count and resampled / count > 1e-3:
        raise SamplerStallError(f"resample rate {resampled / count:.2e} exceeds 0.1%")
    return SampleBatch(
        draws=x,
        seed=seed,
        meta={"model": "vspherical", "generator": f.label, "v": v.label,
              "mu": params.mu, "sigma": params.sigma, "n": n},
        acceptance={"direction": acc},
        resampled=resampled,
    )


def direction_density(u, v: VFunction, c: float):
    """Density c v(u)^{-n} of x/||x|| w.r.t. surface measure on S^{n-1} (mu = 0)."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    if np.any(np.abs(np.linalg.norm(u, axis=-1) - 1.0) > 1e-10):
        raise DomainError("direction must be a unit vector")
    return c * v(u) ** (-float(n))


def _normal_direction(z: np.ndarray, v: VFunction) -> np.ndarray:
    if v.grad is not None:
        g = np.asarray(v.grad(z), dtype=float)
    else:
        n = z.shape[0]
        h = FD_STEP * max(1.0, float(np.linalg.norm(z)))
        g = np.empty(n)
        v0 = float(v(z))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fwd = (float(v(z + e)) - v0) / h
            bwd = (v0 - float(v(z - e))) / h
            if abs(fwd - bwd) > 1e-3 * (abs(fwd) + abs(bwd)) + 1e-4:
                raise NonDifferentiableError(
                    f"{v.label} is not differentiable at z (coordinate {i}: "
                    f"one-sided slopes {fwd:.6g} vs {bwd:.6g})"
                )
            g[i] = 0.5 * (fwd + bwd)
    return g / np.linalg.norm(g)


def star_cross_section_density(z, v: VFunction, c: float) -> float:
    """c <z, n_z>: density of z(x) = x / v(x) w.r.t. the surface element of {v = 1}."""
    z = np.asarray(z, dtype=float)
    if abs(float(v(z)) - 1.0) > 1e-10:
        raise DomainError("z must lie on the boundary {v = 1}")
    nz = _normal_direction(z, v)
    return c * float(z @ nz)


def regression_residual_direction(y, X):
    """Normalised least-squares residual e/||e|| (zero vector when e = 0).

    ``y`` may be a single response (n,) or a stack (m, n).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    Q, R, _ = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if k > n or diag.size < k or diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise RankDeficientError(f"design matrix has rank < {k}")
    y = np.asarray(y, dtype=float)
    e = y - (y @ Q) @ Q.T
    norm = np.linalg.norm(e, axis=-1, keepdims=True)
    ynorm = np.linalg.norm(y, axis=-1, keepdims=True)
    zero = norm <= 1e-12 * np.maximum(ynorm, 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(zero, 0.0, e / np.where(zero, 1.0, norm))
    return out


def vspherical_marginal_kernel(x, mu, v: VFunction, a: float = 0.0):
    """m(v(x - mu)) / v(x - mu)^n with m(g) = g^a."""
    d = np.asarray(x, dtype=float) - np.asarray(mu, dtype=float)
    n = d.shape[-1]
    vd = v(d)
    if np.any(vd == 0):
        raise ExcludedPointError("kernel is undefined at x = mu")
    return vd ** (a - n)


# ---------------------------------------------------------------------------
# orbital model


def make_model(v: VFunction, n: int, decomposition: str = "v") -> OrbitalModel:
    """The v-spherical family as an orbital model (H = R^n, G = R_{>0})."""
    v.check_dim(n)
    if decomposition == "v":
        r = v
        s = lambda z: 1.0  # noqa: E731
    elif decomposition == "norm":
        r = lambda x: float(np.linalg.norm(x))  # noqa: E731
        s = lambda z: float(v(z))  # noqa: E731
    else:
        raise DomainError("decomposition must be 'v' or 'norm'")

    def g_action(g, x):
        g = np.asarray(g, dtype=float)
        return g[..., None] * x if g.ndim else g * x

    def sampler(f, theta, count, rng):
        return sample(count, VSphericalParams(theta.h, theta.g), v, f, rng).draws

    def is_member(x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and np.any(x != 0))

    return OrbitalModel(
        label=f"vspherical[{v.label},{decomposition}]",
        point_shape=(n,),
        r=lambda x: float(r(x)) if np.ndim(x) == 1 else r(x),
        s=s,
        chi_H=lambda mu: 1.0,
        chi_G=lambda g: np.asarray(g, dtype=float) ** n,
        delta_G=lambda g: 1.0,
        h_action=lambda mu, x: np.asarray(x, dtype=float) + mu,
        h_inverse=lambda mu: -np.asarray(mu, dtype=float),
        g_action=g_action,
        g_inverse=lambda g: 1.0 / np.asarray(g, dtype=float),
        g_mul=lambda a, b: np.asarray(a, dtype=float) * b,
        is_member=is_member,
        h_identity=np.zeros(n),
        g_identity=1.0,
        group=POSITIVE_REALS,
        sampler=sampler,
        random_h=lambda rng: rng.standard_normal(n),
        random_g=lambda rng: float(np.exp(rng.normal(0.0, 1.0))),
        random_point=lambda rng: rng.standard_normal(n) * np.exp(rng.normal(0.0, 1.0)),
        extra={"v": v, "n": n, "decomposition": decomposition},
    )


def elliptical_constant(Sigma0) -> float:
    """1 / (omega_n det(Sigma0)^{1/2})."""
    S = as_posdef(Sigma0)
    n = S.shape[0]
    return 1.0 / (sphere_surface_area(n) * math.sqrt(np.linalg.det(S)))


def radial_cdf(f: RadialGenerator, n: int, r, spec: QuadratureSpec = QuadratureSpec(rtol=1e-9)):
    """P(R <= r) for R with density proportional to f(r) r^{n-1} (quadrature)."""
    total = radial_mass(f, n)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        if ri <= 0:
            out[i] = 0.0
            continue
        # integrate in log r from far below to log ri
        part = integrate_interval(
            lambda u: f.eval(np.exp(u)) * np.exp(n * u), -60.0, math.log(ri), rtol=spec.rtol,
        ).value
        out[i] = part / total
    return out


__all__ = [
    "VFunction", "v_euclidean", "v_elliptical", "v_lq", "v_max", "homogeneity_error",
    "RadialGenerator", "gaussian", "exp_power", "student", "builtin_generator",
    "BUILTIN_GENERATORS", "radial_mass", "cross_section_mass", "normalize_generator",
    "VSphericalParams", "density", "sample", "sample_directions", "direction_envelope",
    "direction_density", "star_cross_section_density", "regression_residual_direction",
    "vspherical_marginal_kernel", "make_model", "elliptical_constant", "radial_cdf",
    "tabulated_radius_sampler",
]
