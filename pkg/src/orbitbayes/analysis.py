"""Verification engines: null robustness, marginal equivalence, propriety.

``null_robustness_test`` draws from a model under two generators at the same
parameter point and compares the laws of an invariant statistic with the
energy-distance permutation test.  ``marginal_equivalence_check`` integrates
the nuisance parameter out numerically and compares against the closed-form
marginal kernel over a grid of (x, h) points.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.stats import qmc

from .affine import affine_posterior_kernel, column_projector
from .batch import SeedLike, fmt, to_jsonable
from .core import (
    GENERAL_LINEAR, POSITIVE_REALS, DensityGenerator, GroupIntegral, OrbitalModel, ParamPoint,
    gl_importance_integral, marginal_kernel, sampling_density,
)
from .energy import energy_test
from .errors import (
    DivergenceError, DomainError, ExcludedPointError, GridPointError, IntegrabilityError,
    InvarianceViolationError, NonConvergenceError,
)
from .numerics import QuadratureSpec, integrate_positive, sphere_integral
from .vspherical import regression_residual_direction, vspherical_marginal_kernel

SCHEMA = 1
INVARIANCE_TOL = 1e-8
SINGULAR_MARGIN = 1e-3
TAIL_MARGIN = 1e-3
MIN_COUNT = 100


# ---------------------------------------------------------------------------
# seeds and serialisation helpers


def child_streams(rng: SeedLike, count: int) -> tuple[list[np.random.Generator], Optional[int]]:
    """Independent generators for ``count`` tasks, derived from one master seed."""
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(count)), None
    if rng is None:
        raise DomainError("an explicit seed is required")
    seq = np.random.SeedSequence(int(rng))
    return [np.random.default_rng(s) for s in seq.spawn(count)], int(rng)


def config_hash(config: Any) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    text = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def write_json(path, record: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(record), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path, header: list, rows: list, preamble: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("# " + json.dumps(to_jsonable(preamble), sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class Statistic:
    """A statistic on the sample space with its declared invariance class.

    ``fn`` maps a batch of points (count, *point_shape) to (count, d).
    ``invariance`` is ``"G"``, ``"GH"`` or ``None`` (no invariance claimed;
    used for negative controls).  ``random_h`` draws the H-elements the
    statistic is invariant under when that is a subgroup of the model's H.
    """

    fn: Callable
    label: str
    invariance: Optional[str] = "G"
    random_h: Optional[Callable] = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.fn(x), dtype=float)
        return out.reshape(len(x), -1)


def direction_statistic() -> Statistic:
    """x / ||x|| with the Frobenius norm; invariant under positive scaling."""
    def fn(x):
        flat = x.reshape(len(x), -1)
        return flat / np.linalg.norm(flat, axis=1, keepdims=True)

    return Statistic(fn, "direction", "G")


def raw_statistic() -> Statistic:
    """The sample itself; carries no invariance and serves as a negative control."""
    return Statistic(lambda x: x.reshape(len(x), -1), "raw", None)


def cross_section_statistic(model: OrbitalModel) -> Statistic:
    """z(x), the model's cross-section map, applied point by point."""
    return Statistic(lambda x: np.stack([np.ravel(model.z(p)) for p in x]), "cross-section", "G")


def column_projector_statistic() -> Statistic:
    """Projector onto the column space of Y; a bounded affine-shape invariant."""
    return Statistic(lambda Y: column_projector(Y).reshape(len(Y), -1), "column-projector", "G")


def residual_direction_statistic(X) -> Statistic:
    """Normalised least-squares residual for design X; invariant under y -> c y + X b."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]

    def random_h(rng):
        return X @ rng.standard_normal(X.shape[1])

    return Statistic(lambda y: regression_residual_direction(y, X), "residual-direction", "GH",
                     random_h=random_h)


BUILTIN_STATISTICS = {
    "direction": direction_statistic,
    "raw": raw_statistic,
    "column-projector": column_projector_statistic,
}


def _is_identity(model: OrbitalModel, h) -> bool:
    return bool(np.array_equal(np.asarray(h, dtype=float), np.asarray(model.h_identity, dtype=float)))


def check_invariance(statistic: Statistic, model: OrbitalModel, x, rng: np.random.Generator,
                     trials: int = 20) -> float:
    """Largest relative change of the statistic under random group actions.

    Raises InvarianceViolationError when it exceeds 1e-8.
    """
    if statistic.invariance is None:
        return 0.0
    x = np.asarray(x, dtype=float)[:trials]
    base = statistic(x)
    scale = max(1.0, float(np.max(np.abs(base))))
    worst = 0.0
    actions = [("G", lambda p: model.g_action(model.random_g(rng), p))]
    if statistic.invariance == "GH":
        draw_h = statistic.random_h or model.random_h
        actions.append(("H", lambda p: model.h_action(draw_h(rng), p)))
    for name, act in actions:
        moved = statistic(np.stack([act(p) for p in x]))
        dev = float(np.max(np.abs(moved - base))) / scale
        if dev > INVARIANCE_TOL:
            raise InvarianceViolationError(
                f"statistic {statistic.label!r} changes by {dev:.3g} under a random {name}-action "
                f"(tolerance {INVARIANCE_TOL:g}); it is not {statistic.invariance}-invariant"
            )
        worst = max(worst, dev)
    return worst


# ---------------------------------------------------------------------------
# null robustness


@dataclass(frozen=True)
class RobustnessReport:
    model: str
    statistic: str
    generators: tuple
    count: int
    energy_distance: float
    pvalue: float
    permutations: int
    seed: Optional[int]
    method: str = "sliced"
    directions: int = 0
    invariance: Optional[str] = "G"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.pvalue <= 1.0:
            raise DomainError("p-value must lie in [0, 1]")
        if self.count < MIN_COUNT:
            raise DomainError(f"sample size per side must be at least {MIN_COUNT}")

    def passed(self, level: float = 0.01) -> bool:
        """True when the test does not reject equality of laws at ``level``."""
        return self.pvalue >= level

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "kind": "robustness", **to_jsonable(asdict(self))}

    def to_json(self, path) -> Path:
        return write_json(path, self.to_dict())

    def to_csv(self, path) -> Path:
        d = self.to_dict()
        header = ["model", "statistic", "generator_1", "generator_2", "count",
                  "energy_distance", "pvalue", "permutations"]
        row = [self.model, self.statistic, *self.generators, self.count,
               self.energy_distance, self.pvalue, self.permutations]
        return write_csv(path, header, [row],
                          {"schema": SCHEMA, "seed": self.seed, "meta": d["meta"]})


def null_robustness_test(model: OrbitalModel, statistic: Statistic, f1: DensityGenerator,
                         f2: DensityGenerator, h, g, count: int, rng: SeedLike,
                         permutations: int = 500, method: str = "auto",
                         directions: int = 32) -> RobustnessReport:
    """Compare the law of ``statistic`` under f1 and f2 at the parameter point (h, g).

    The statistic must be G-invariant, and H-invariant too when h is not the
    identity; a statistic with ``invariance=None`` skips that check and is
    meant for negative controls.
    """
    if count < MIN_COUNT:
        raise DomainError(f"count must be at least {MIN_COUNT}")
    if statistic.invariance not in ("G", "GH", None):
        raise DomainError(f"unknown invariance class {statistic.invariance!r}")
    if statistic.invariance == "G" and not _is_identity(model, h):
        raise DomainError("with h different from the identity the statistic must be GH-invariant")
    (r1, r2, r_test, r_inv), seed = child_streams(rng, 4)
    theta = ParamPoint(h, g)
    x1 = np.asarray(model.sample(f1, theta, count, r1))
    x2 = np.asarray(model.sample(f2, theta, count, r2))
    check_invariance(statistic, model, x1, r_inv)
    t1, t2 = statistic(x1), statistic(x2)
    res = energy_test(t1, t2, r_test, permutations=permutations, method=method,
                      directions=directions)
    return RobustnessReport(
        model=model.label, statistic=statistic.label, generators=(f1.label, f2.label),
        count=count, energy_distance=max(res.statistic, 0.0), pvalue=res.pvalue,
        permutations=res.permutations, seed=seed, method=res.method,
        directions=res.directions, invariance=statistic.invariance,
    )


# ---------------------------------------------------------------------------
# nuisance integrals


def _unit_multiplier(model: OrbitalModel) -> Callable:
    """m = 1, returning the batch shape of g (matrices on GL_k contribute no axes)."""
    drop = 0 if model.group == POSITIVE_REALS else 2

    def m(g):
        shape = np.shape(g)
        return np.ones(shape[:len(shape) - drop])
    return m


def _scalar_view(model: OrbitalModel, t):
    """Map positive reals t to G: t itself on R_{>0}, t I on GL_k."""
    t = np.asarray(t, dtype=float)
    if model.group == POSITIVE_REALS:
        return t
    k = model.group_dim
    return t[..., None, None] * np.eye(k)


def nuisance_marginal(model: OrbitalModel, x, h, f: DensityGenerator,
                      m: Optional[Callable] = None,
                      spec: QuadratureSpec = QuadratureSpec(),
                      rng: Optional[np.random.Generator] = None, draws: int = 200_000,
                      proposal: str = "cauchy") -> GroupIntegral:
    """int_G p(x | h, g; f) m(g) mu_G(dg).

    Quadrature on R_{>0} (mu = dg/g) and on GL_1 (twice the positive half, the
    density being even in e).  For GL_k with k > 1 importance sampling is used.
    """
    m = m or _unit_multiplier(model)
    x = np.asarray(x, dtype=float)

    def dens(g):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = np.asarray(sampling_density(model, x, ParamPoint(h, g), f), dtype=float)
            val = val * np.asarray(m(g), dtype=float)
        return np.where(np.isnan(val), 0.0, val)

    if model.group == POSITIVE_REALS or (model.group == GENERAL_LINEAR and model.group_dim == 1):
        factor = 1.0 if model.group == POSITIVE_REALS else 2.0

        def integrand(t):
            t = np.asarray(t, dtype=float)
            return factor * dens(_scalar_view(model, t)) / t

        res = integrate_positive(integrand, spec)
        return GroupIntegral(res.value, res.error, "quadrature")
    if model.group == GENERAL_LINEAR:
        if rng is None:
            raise DomainError("the GL_k nuisance integral needs a seeded rng")
        k = model.group_dim
        return gl_importance_integral(dens, k, rng, draws, proposal=proposal)
    raise DomainError(f"unknown group kind {model.group!r}")


@dataclass(frozen=True)
class IntegrabilityResult:
    passed: bool
    value: float
    slope_zero: float
    slope_inf: float
    diagnostic: str = ""


def _tail_slope(q: Callable, us: np.ndarray) -> float:
    """Least-squares slope of log q(e^u) against u over the points where q > 0."""
    vals = np.asarray([float(q(math.exp(u))) for u in us])
    good = vals > 0
    if good.sum() < 2:
        return -math.inf if us[0] > 0 else math.inf
    return float(np.polyfit(us[good], np.log(vals[good]), 1)[0])


def integrability_check(model: OrbitalModel, f: DensityGenerator, m: Optional[Callable] = None,
                        spec: QuadratureSpec = QuadratureSpec(rtol=1e-6),
                        cutoff: float = 30.0) -> IntegrabilityResult:
    """Numerical check of int_G chi_G(g) f(g) / (m(g) Delta_G(g)) mu_G(dg) < inf.

    The integrand is followed along the ray t e_G (t > 0).  With q(t) its
    density against dt, the fitted log-log slope must be at most -1 - 1e-3
    beyond e^{cutoff / 2} and at least -1 + 1e-3 below e^{-cutoff / 2}, and
    the quadrature over (0, inf) must converge.  On GL_k the ray is the
    identity direction, which decides integrability for trace-form
    generators.
    """
    m = m or _unit_multiplier(model)

    def q(t):
        g = _scalar_view(model, t)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = (np.asarray(model.chi_G(g), dtype=float) * np.asarray(f.eval(g), dtype=float)
                   / (np.asarray(m(g), dtype=float) * np.asarray(model.delta_G(g), dtype=float)))
        val = np.where(np.isnan(val), 0.0, val)
        return val / np.asarray(t, dtype=float)

    us = np.linspace(cutoff / 2, cutoff, 6)
    slope_inf = _tail_slope(q, us)
    slope_zero = _tail_slope(q, -us)
    value = math.nan
    diag = ""
    try:
        value = integrate_positive(q, spec).value
    except (DivergenceError, NonConvergenceError) as exc:
        diag = str(exc)
    ok_tails = slope_inf <= -1 - TAIL_MARGIN and slope_zero >= -1 + TAIL_MARGIN
    if not ok_tails and not diag:
        diag = f"tail slopes {slope_zero:.4g} at 0 and {slope_inf:.4g} at infinity"
    return IntegrabilityResult(bool(ok_tails and math.isfinite(value)), value,
                               slope_zero, slope_inf, diag)


# ---------------------------------------------------------------------------
# marginal equivalence


@dataclass(frozen=True)
class EquivalenceReport:
    model: str
    generators: tuple
    grid: list
    log_ratio_1: list
    log_ratio_2: list
    spread_1: float
    spread_2: float
    error_1: list
    error_2: list
    offset: float
    tolerance: float
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.grid:
            raise DomainError("the grid is empty")

    @property
    def spread(self) -> float:
        return max(self.spread_1, self.spread_2)

    def passed(self) -> bool:
        return self.spread < self.tolerance

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "kind": "equivalence", **to_jsonable(asdict(self))}

    def to_json(self, path) -> Path:
        return write_json(path, self.to_dict())

    def to_csv(self, path) -> Path:
        header = ["index", "x", "h", "log_ratio_1", "log_ratio_2", "rel_error_1", "rel_error_2"]
        rows = []
        for i, (x, h) in enumerate(self.grid):
            rows.append([i, json.dumps(to_jsonable(x)), json.dumps(to_jsonable(h)),
                         self.log_ratio_1[i], self.log_ratio_2[i], self.error_1[i], self.error_2[i]])
        pre = {"schema": SCHEMA, "seed": self.seed, "model": self.model,
               "generators": list(self.generators), "meta": to_jsonable(self.meta)}
        return write_csv(path, header, rows, pre)


def _spread(values: np.ndarray) -> float:
    return float(np.max(np.abs(values - values.mean())))


def marginal_equivalence_check(model: OrbitalModel, f1: DensityGenerator, f2: DensityGenerator,
                               grid: Sequence, m: Optional[Callable] = None,
                               quad: QuadratureSpec = QuadratureSpec(),
                               rng: SeedLike = None,
                               kernel: Optional[Callable] = None,
                               tolerance: float = 1e-4,
                               draws: int = 200_000, workers: int = 1) -> EquivalenceReport:
    """Compare numeric nuisance marginals with the closed-form kernel over ``grid``.

    ``grid`` is a sequence of (x, h) pairs.  ``kernel(x, h)`` defaults to the
    model's marginal kernel with multiplier ``m``.  Only the constancy of each
    generator's log-ratio across the grid is asserted; the offset between the
    two generators is reported.  Grid points are independent; with
    ``workers > 1`` they are evaluated in a thread pool and assembled by index.
    """
    grid = list(grid)
    if not grid:
        raise DomainError("the grid is empty")
    for f in (f1, f2):
        chk = integrability_check(model, f, m)
        if not chk.passed:
            raise IntegrabilityError(f"generator {f.label!r} fails the integrability check: "
                                     f"{chk.diagnostic}")
    for i, (x, h) in enumerate(grid):
        y = model.h_action(model.h_inverse(h), np.asarray(x, dtype=float))
        if not model.is_member(y):
            raise GridPointError(i, "h^{-1} x lies outside the regular set")
    if kernel is None:
        def kernel(x, h):
            return marginal_kernel(model, x, h, m or (lambda g: 1.0))
    streams, seed = (None, None)
    if model.group == GENERAL_LINEAR and model.group_dim > 1:
        streams, seed = child_streams(rng, 2 * len(grid))
    elif rng is not None and not isinstance(rng, np.random.Generator):
        seed = int(rng)
    def evaluate(i):
        x, h = grid[i]
        kval = float(kernel(x, h))
        out = []
        for j, f in enumerate((f1, f2)):
            stream = streams[2 * i + j] if streams else None
            res = nuisance_marginal(model, x, h, f, m, quad, rng=stream, draws=draws)
            if not (res.value > 0 and kval > 0):
                raise NonConvergenceError(f"grid point {i}: non-positive marginal or kernel")
            out.append((math.log(res.value / kval), res.error / res.value))
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, range(len(grid))))
    else:
        results = [evaluate(i) for i in range(len(grid))]
    ratios = [[r[j][0] for r in results] for j in range(2)]
    errors = [[r[j][1] for r in results] for j in range(2)]
    r1, r2 = np.asarray(ratios[0]), np.asarray(ratios[1])
    return EquivalenceReport(
        model=model.label, generators=(f1.label, f2.label),
        grid=[(to_jsonable(np.asarray(x)), to_jsonable(np.asarray(h))) for x, h in grid],
        log_ratio_1=r1.tolist(), log_ratio_2=r2.tolist(),
        spread_1=_spread(r1), spread_2=_spread(r2),
        error_1=errors[0], error_2=errors[1],
        offset=float(r1.mean() - r2.mean()), tolerance=tolerance, seed=seed,
    )


# ---------------------------------------------------------------------------
# default grids


def _lhs(dim: int, count: int, seed: SeedLike) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return qmc.LatinHypercube(d=dim, seed=rng).random(count)


def _take_regular(points: list, count: int, what: str) -> list:
    if len(points) < count:
        raise DomainError(f"could not place {count} {what} grid points away from the singular set")
    return points[:count]


def vspherical_grid(n: int, seed: SeedLike, count: int = 25, box: float = 3.0) -> list:
    """Latin-hypercube (x, mu) pairs in [-box, box]^{2n} with ||x - mu|| >= 1e-3."""
    u = _lhs(2 * n, 2 * count, seed)
    pts = (2 * u - 1) * box
    out = [(p[:n], p[n:]) for p in pts if np.linalg.norm(p[:n] - p[n:]) >= SINGULAR_MARGIN]
    return _take_regular(out, count, "v-spherical")


def _orthogonal_from_unit(w: np.ndarray, k: int) -> np.ndarray:
    A = np.zeros((k, k))
    iu = np.triu_indices(k, 1)
    A[iu] = (2 * w - 1) * math.pi
    return expm(A - A.T)


def pca_grid(n: int, k: int, seed: SeedLike, count: int = 4, box: float = 2.0) -> list:
    """Latin-hypercube (X, P) pairs; P = exp(skew) in SO(k), ||X|| >= 1e-3."""
    nk = n * k
    na = k * (k - 1) // 2
    u = _lhs(nk + na, 2 * count, seed)
    out = []
    for p in u:
        X = ((2 * p[:nk] - 1) * box).reshape(n, k)
        if np.linalg.norm(X) < SINGULAR_MARGIN:
            continue
        out.append((X, _orthogonal_from_unit(p[nk:], k)))
    return _take_regular(out, count, "PCA")


def affine_grid(n: int, k: int, seed: SeedLike, rows: int = 5, cols: int = 5,
                box: float = 2.0) -> list:
    """Product grid of ``rows`` Y values and ``cols`` M values (Latin hypercube each).

    Pairs whose leading block Y1 - M1 has |det| < 1e-3 are dropped.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Ys = ((2 * _lhs(n * k, rows, rng) - 1) * box).reshape(rows, n, k)
    Ms = ((2 * _lhs(n * k, cols, rng) - 1) * box).reshape(cols, n, k)
    out = []
    for Y in Ys:
        for M in Ms:
            if abs(np.linalg.det((Y - M)[:k])) >= SINGULAR_MARGIN:
                out.append((Y, M))
    return out


def affine_kernel(Sigma0) -> Callable:
    """Closed posterior kernel p(Y, M) as a grid kernel."""
    return lambda Y, M: affine_posterior_kernel(Y, M, Sigma0)


# ---------------------------------------------------------------------------
# posterior propriety


@dataclass(frozen=True)
class Prior:
    """Prior on the location mu in R^n.

    ``kind`` is ``"density"`` (``density`` evaluates a batch (..., n) and
    ``sampler(rng, count)`` draws from it), ``"point"`` (mass at ``point``)
    or ``"flat"`` (Lebesgue measure, improper).
    """

    kind: str
    density: Optional[Callable] = None
    sampler: Optional[Callable] = None
    point: Any = None

    def __post_init__(self):
        if self.kind not in ("density", "point", "flat"):
            raise DomainError(f"unknown prior kind {self.kind!r}")
        if self.kind == "density" and self.density is None:
            raise DomainError("a density prior needs a density function")
        if self.kind == "point" and self.point is None:
            raise DomainError("a point prior needs its location")


def standard_normal_prior(n: int) -> Prior:
    const = (2 * math.pi) ** (-n / 2)
    return Prior(
        "density",
        density=lambda mu: const * np.exp(-0.5 * np.sum(np.square(mu), axis=-1)),
        sampler=lambda rng, count: rng.standard_normal((count, n)),
    )


@dataclass(frozen=True)
class ProprietyResult:
    value: float
    error: float
    finite: bool
    method: str
    diagnostic: str = ""


def posterior_propriety_check(model: OrbitalModel, prior: Prior, x, a: float = 0.0,
                              quad: QuadratureSpec = QuadratureSpec(rtol=1e-6),
                              rng: Optional[np.random.Generator] = None,
                              draws: int = 200_000) -> ProprietyResult:
    """Estimate p(x) = int p(x, mu) Pi(dmu) for a v-spherical model.

    p(x, mu) is the marginal kernel v(x - mu)^{a - n}.  For n <= 3 the integral
    is done in polar coordinates about x, with an expanding radial domain
    whose non-decaying increments flag divergence (at mu = x or at infinity).
    Larger n use Monte Carlo from the prior sampler.  Non-finite estimates are
    flagged rather than raised.
    """
    v = model.extra.get("v")
    if v is None or model.group != POSITIVE_REALS:
        raise DomainError("posterior propriety is implemented for v-spherical models only")
    n = int(model.extra["n"])
    x = np.asarray(x, dtype=float)

    if prior.kind == "point":
        mu0 = np.asarray(prior.point, dtype=float)
        try:
            val = float(vspherical_marginal_kernel(x, mu0, v, a))
        except ExcludedPointError as exc:
            return ProprietyResult(math.inf, math.nan, False, "point", str(exc))
        return ProprietyResult(val, 0.0, math.isfinite(val), "point")

    density = prior.density if prior.kind == "density" else (lambda mu: np.ones(np.shape(mu)[:-1]))
    if n <= 3:
        inner_spec = QuadratureSpec(rtol=quad.rtol * 0.1, max_subdivisions=quad.max_subdivisions)

        def along(u):
            u = np.asarray(u, dtype=float)
            flat = u.reshape(-1, n)
            out = np.empty(len(flat))
            for i, ui in enumerate(flat):
                vu = float(v(ui))

                def radial(rho, ui=ui):
                    rho = np.asarray(rho, dtype=float)
                    mu = x - rho[..., None] * ui
                    return rho ** (a - 1.0) * density(mu)

                out[i] = vu ** (a - n) * integrate_positive(radial, inner_spec).value
            return out.reshape(u.shape[:-1])

        try:
            res = sphere_integral(along, n, quad)
        except (DivergenceError, NonConvergenceError) as exc:
            return ProprietyResult(math.inf, math.nan, False, "polar-quadrature", str(exc))
        finite = math.isfinite(res.value)
        return ProprietyResult(res.value, res.error, finite, "polar-quadrature",
                               "" if finite else "non-finite estimate")
    if prior.kind == "flat" or prior.sampler is None:
        raise DomainError("Monte Carlo propriety checks need a proper prior with a sampler")
    if rng is None:
        raise DomainError("the Monte Carlo propriety check needs a seeded rng")
    mu = prior.sampler(rng, draws)
    with np.errstate(divide="ignore", over="ignore"):
        w = vspherical_marginal_kernel(x, mu, v, a)
    mean = float(np.mean(w))
    err = float(np.std(w) / math.sqrt(draws))
    finite = math.isfinite(mean) and math.isfinite(err)
    return ProprietyResult(mean, err, finite, "monte-carlo", "" if finite else "non-finite estimate")


__all__ = [
    "Statistic", "direction_statistic", "raw_statistic", "cross_section_statistic",
    "column_projector_statistic", "residual_direction_statistic", "BUILTIN_STATISTICS",
    "check_invariance", "RobustnessReport", "null_robustness_test", "nuisance_marginal",
    "IntegrabilityResult", "integrability_check", "EquivalenceReport",
    "marginal_equivalence_check", "vspherical_grid", "pca_grid", "affine_grid", "affine_kernel",
    "Prior", "standard_normal_prior", "ProprietyResult", "posterior_propriety_check",
    "child_streams", "config_hash", "write_json", "write_csv", "SCHEMA",
]
