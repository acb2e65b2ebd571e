"""Acceptance checks shared by ``orbitbayes selftest`` and the test suite.

Each check takes a seed and returns a :class:`CriterionResult` whose metrics
are deterministic functions of that seed.  Wall-clock timings are kept out
of the written reports so two runs with one seed produce identical files.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import affine, analysis, pca, trace
from . import vspherical as vs
from .batch import to_jsonable
from .core import ParamPoint, power_multiplier, sampling_density
from .numerics import QuadratureSpec, integrate_interval, integrate_radial, sphere_integral

LEVEL = 0.01
TRIO = ("gaussian", "exp-power-4", "student-3")
PAIRS = (("gaussian", "exp-power-4"), ("gaussian", "student-3"), ("exp-power-4", "student-3"))


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict
    budget: float
    elapsed: float = field(default=0.0, compare=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.number:2d} {status}  {self.name}  "
                f"({self.elapsed:.1f}s of {self.budget:g}s)")

    def record(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "metrics": to_jsonable(self.metrics), "budget_seconds": self.budget}


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    den = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / den


# ---------------------------------------------------------------------------
# 1. elliptical normalizing constant


def check_elliptical_constant(seed: int) -> tuple[bool, dict]:
    worst = 0.0
    cases = []
    for n in (2, 3):
        for diag in ([1.0] * n, [4.0] + [1.0] * (n - 1)):
            S = np.diag(diag)
            v = vs.v_elliptical(S)
            # the sphere quadrature keeps this independent of the closed-form ball volume
            mass = vs.cross_section_mass(v, n, method="quadrature")
            exact = vs.elliptical_constant(S)
            for label in vs.BUILTIN_GENERATORS:
                f = vs.normalize_generator(vs.builtin_generator(label, n), v, n, mass=mass)
                c = vs.radial_mass(f, n)
                err = abs(c / exact - 1.0)
                worst = max(worst, err)
                cases.append({"n": n, "Sigma0": diag, "generator": label, "c": c,
                              "rel_error": err})
    return worst < 1e-6, {"max_rel_error": worst, "cases": cases}


# ---------------------------------------------------------------------------
# 2. direction density


def check_direction_density(seed: int, draws: int = 100_000, bins: int = 36) -> tuple[bool, dict]:
    S = np.diag([4.0, 1.0])
    Sinv = np.linalg.inv(S)
    c = vs.elliptical_constant(S)

    def dens_u(u):
        return c * np.einsum("...i,ij,...j->...", u, Sinv, u) ** (-1.0)

    def dens_theta(t):
        return dens_u(np.stack([np.cos(t), np.sin(t)], axis=-1))

    total = sphere_integral(dens_u, 2, QuadratureSpec(rtol=1e-10)).value
    v = vs.v_elliptical(S)
    f = vs.normalize_generator(vs.gaussian(2), v)
    batch = vs.sample(draws, vs.VSphericalParams(np.zeros(2), 1.0), v, f, seed)
    x = batch.draws
    theta = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * math.pi)
    edges = np.linspace(0.0, 2 * math.pi, bins + 1)
    observed = np.histogram(theta, edges)[0]
    probs = np.array([integrate_interval(dens_theta, a, b, rtol=1e-10).value
                      for a, b in zip(edges[:-1], edges[1:])])
    expected = probs / probs.sum() * draws
    chi = stats.chisquare(observed, expected)
    ok = abs(total - 1.0) < 1e-6 and chi.pvalue >= LEVEL
    return ok, {"integral": total, "integral_error": abs(total - 1.0),
                "chi2": float(chi.statistic), "pvalue": float(chi.pvalue), "bins": bins,
                "draws": draws}


# ---------------------------------------------------------------------------
# 3. null robustness for three models


def robustness_models() -> list:
    """(model, generators by label, statistic, h, g) for the three models."""
    v = vs.v_euclidean(3)
    vmodel = vs.make_model(v, 3)
    vgens = {k: vs.normalize_generator(vs.builtin_generator(k, 3), v) for k in TRIO}
    amodel = affine.make_model(4, 2)
    agens = {k: affine.group_generator(trace.builtin_trace_generator(k, 8), np.eye(4)) for k in TRIO}
    lam = np.array([3.0, 1.0])
    pmodel = pca.make_model(5, 2, lam)
    pgens = {k: pca.group_generator(trace.builtin_trace_generator(k, 10), lam, 5) for k in TRIO}
    return [
        (vmodel, vgens, analysis.direction_statistic(), np.zeros(3), 1.7),
        (amodel, agens, analysis.column_projector_statistic(), np.zeros((4, 2)),
         np.array([[1.0, 0.3], [0.0, 0.8]])),
        (pmodel, pgens, analysis.cross_section_statistic(pmodel), np.eye(2), 1.5),
    ]


def check_null_robustness(seed: int, count: int = 10_000,
                          permutations: int = 500) -> tuple[bool, dict]:
    models = robustness_models()
    streams = np.random.SeedSequence(seed).spawn(len(models) * (len(PAIRS) + 1))
    tests, controls = [], []
    ok = True
    it = iter(streams)
    for model, gens, stat, h, g in models:
        for a, b in PAIRS:
            rep = analysis.null_robustness_test(model, stat, gens[a], gens[b], h, g, count,
                                                np.random.default_rng(next(it)),
                                                permutations=permutations)
            tests.append({"model": model.label, "statistic": stat.label, "pair": [a, b],
                          "energy": rep.energy_distance, "pvalue": rep.pvalue})
            ok &= rep.passed(LEVEL)
        a, b = PAIRS[0]
        rep = analysis.null_robustness_test(model, analysis.raw_statistic(), gens[a], gens[b],
                                            h, g, count, np.random.default_rng(next(it)),
                                            permutations=permutations)
        controls.append({"model": model.label, "pair": [a, b], "energy": rep.energy_distance,
                         "pvalue": rep.pvalue})
        ok &= not rep.passed(LEVEL)
    return ok, {"tests": tests, "negative_controls": controls, "count": count}


# ---------------------------------------------------------------------------
# 4. regression residual direction


def check_regression_direction(seed: int, count: int = 10_000) -> tuple[bool, dict]:
    n = 5
    X = np.column_stack([np.ones(n), np.arange(1.0, n + 1)])
    beta = np.array([1.0, -2.0])
    sigma = 2.5
    v = vs.v_euclidean(n)
    model = vs.make_model(v, n)
    f1 = vs.normalize_generator(vs.gaussian(n), v)
    f2 = vs.normalize_generator(vs.student(3.0, n), v)
    rep = analysis.null_robustness_test(model, analysis.residual_direction_statistic(X), f1, f2,
                                        X @ beta, sigma, count, seed)
    return rep.passed(LEVEL), {"energy": rep.energy_distance, "pvalue": rep.pvalue,
                               "beta": beta, "sigma": sigma, "count": count}


# ---------------------------------------------------------------------------
# 5. v-spherical marginal equivalence


def check_vspherical_equivalence(seed: int) -> tuple[bool, dict]:
    S = np.diag([4.0, 1.0])
    v = vs.v_elliptical(S)
    model = vs.make_model(v, 2)
    grid = analysis.vspherical_grid(2, seed, count=25)
    runs = []
    ok = True
    for a in (0.0, 1.0):
        for l1, l2 in (("gaussian", "exp-power-4"), ("exp-power-1", "student-3")):
            f1 = vs.normalize_generator(vs.builtin_generator(l1, 2), v)
            f2 = vs.normalize_generator(vs.builtin_generator(l2, 2), v)
            rep = analysis.marginal_equivalence_check(
                model, f1, f2, grid, m=power_multiplier(a), quad=QuadratureSpec(rtol=1e-8),
                kernel=lambda x, mu, a=a: vs.vspherical_marginal_kernel(x, mu, v, a),
                tolerance=1e-4)
            runs.append({"a": a, "pair": [l1, l2], "spread_1": rep.spread_1,
                         "spread_2": rep.spread_2, "offset": rep.offset})
            ok &= rep.passed()
    return ok, {"runs": runs, "grid_points": len(grid)}


# ---------------------------------------------------------------------------
# 6. configuration density


def row_marginal(v_row, Sigma0, n: int = 4, k: int = 2, angles: int = 128) -> float:
    """Marginal density of the first row of V, integrating the second row out.

    Polar coordinates about the origin: the periodic trapezoid rule in the
    angle (exponentially accurate for smooth periodic integrands) inside an
    adaptive radial quadrature.
    """
    v_row = np.asarray(v_row, dtype=float)
    phi = 2 * math.pi * np.arange(angles) / angles
    ring = np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def g(rho):
        rho = np.asarray(rho, dtype=float)
        V = np.empty((*rho.shape, angles, 2, 2))
        V[..., 0, :] = v_row
        V[..., 1, :] = rho[..., None, None] * ring
        return affine.config_density(V, Sigma0, n, k).mean(axis=-1) * 2 * math.pi

    return integrate_radial(g, 2, QuadratureSpec(rtol=1e-11)).value


def cauchy2(v_row) -> float:
    return 1.0 / (2 * math.pi) * (1.0 + float(np.sum(np.square(v_row)))) ** -1.5


def check_configuration_density(seed: int, mc_draws: int = 1_000_000,
                                 gof_draws: int = 100_000) -> tuple[bool, dict]:
    n, k = 4, 2
    S = np.eye(n)
    s_mc, s_gof = np.random.SeedSequence(seed).spawn(2)
    exact = affine.config_constant(S, n, k)
    mc = affine.config_normalization_mc(S, n, k, mc_draws, np.random.default_rng(s_mc))
    const_err = abs(1.0 / mc.value / exact - 1.0)

    # the first row of V has the bivariate Cauchy law; confirm from config_density
    probes = [np.array([0.0, 0.0]), np.array([0.7, -0.4]), np.array([2.0, 1.5])]
    marg_err = max(abs(row_marginal(p, S) / cauchy2(p) - 1.0) for p in probes)

    # equiprobable polar cells: P(|v| <= r) = 1 - (1 + r^2)^{-1/2}, angle uniform
    gen = trace.builtin_trace_generator("student-3", n * k)
    params = affine.MatrixModelParams(np.zeros((n, k)), np.eye(k), S)
    Y = affine.sample_matrix_model(gof_draws, params, gen, np.random.default_rng(s_gof)).draws
    row = affine.configuration_coords(Y, k)[:, 0, :]
    radius = np.linalg.norm(row, axis=1)
    u_rad = 1.0 - (1.0 + radius ** 2) ** -0.5
    u_ang = np.mod(np.arctan2(row[:, 1], row[:, 0]), 2 * math.pi) / (2 * math.pi)
    cells = 10
    idx = np.minimum((u_rad * cells).astype(int), cells - 1) * cells + \
        np.minimum((u_ang * cells).astype(int), cells - 1)
    observed = np.bincount(idx, minlength=cells * cells)
    chi = stats.chisquare(observed)
    ok = const_err < 2e-2 and marg_err < 1e-6 and chi.pvalue >= LEVEL
    return ok, {"exact_constant": exact, "mc_constant": 1.0 / mc.value,
                "rel_error": const_err, "mc_rel_stderr": mc.error / mc.value,
                "row_marginal_rel_error": marg_err, "chi2": float(chi.statistic),
                "pvalue": float(chi.pvalue), "cells": cells * cells}


# ---------------------------------------------------------------------------
# 7. affine posterior kernel, k = 1


def check_affine_kernel(seed: int) -> tuple[bool, dict]:
    n, k = 4, 1
    S = np.diag([1.0, 2.0, 0.5, 1.5])
    model = affine.make_model(n, k, S)
    grid = analysis.affine_grid(n, k, seed, rows=5, cols=5)
    f1 = affine.group_generator(trace.builtin_trace_generator("gaussian", n), S)
    f2 = affine.group_generator(trace.builtin_trace_generator("student-3", n), S)
    rep = analysis.marginal_equivalence_check(model, f1, f2, grid,
                                              quad=QuadratureSpec(rtol=1e-8),
                                              kernel=analysis.affine_kernel(S), tolerance=1e-3)
    return rep.passed(), {"spread_1": rep.spread_1, "spread_2": rep.spread_2,
                          "offset": rep.offset, "grid_points": len(grid)}


# ---------------------------------------------------------------------------
# 8. PCA kernel


def check_pca_kernel(seed: int) -> tuple[bool, dict]:
    n, k = 5, 2
    lam = np.array([3.0, 1.0])
    model = pca.make_model(n, k, lam)
    grid = analysis.pca_grid(n, k, seed, count=4)
    f1 = pca.group_generator(trace.builtin_trace_generator("gaussian", n * k), lam, n)
    f2 = pca.group_generator(trace.builtin_trace_generator("student-3", n * k), lam, n)
    rep = analysis.marginal_equivalence_check(
        model, f1, f2, grid, quad=QuadratureSpec(rtol=1e-8),
        kernel=lambda X, P: pca.pca_marginal_kernel(X, P, lam), tolerance=1e-4)
    flip_err = 0.0
    coset_err = 0.0
    for X, P in grid:
        base = pca.pca_marginal_kernel(X, P, lam)
        canon = pca.canonicalize_sign_coset(P).representative
        for D in pca.sign_matrices(k):
            flip_err = max(flip_err, abs(pca.pca_marginal_kernel(X, P @ D, lam) / base - 1.0))
            coset_err = max(coset_err, float(np.max(np.abs(
                pca.canonicalize_sign_coset(P @ D).representative - canon))))
    ok = rep.passed() and flip_err <= 1e-12 and coset_err <= 1e-12
    return ok, {"spread_1": rep.spread_1, "spread_2": rep.spread_2, "offset": rep.offset,
                "sign_flip_rel_error": flip_err, "coset_representative_error": coset_err}


# ---------------------------------------------------------------------------
# 9. framework self-consistency


def _consistency(model, f, specific: Callable, rng: np.random.Generator, cases: int) -> dict:
    worst = {"equivariance": 0.0, "invariance": 0.0, "reconstruction": 0.0,
             "multiplier": 0.0, "density": 0.0}
    for _ in range(cases):
        x = model.random_point(rng)
        g1, g2 = model.random_g(rng), model.random_g(rng)
        h = model.random_h(rng)
        gx = model.g_action(g1, x)
        worst["equivariance"] = max(worst["equivariance"],
                                    _rel(model.r(gx), model.g_mul(g1, model.r(x))))
        worst["invariance"] = max(worst["invariance"], _rel(model.z(gx), model.z(x)))
        worst["reconstruction"] = max(worst["reconstruction"],
                                      _rel(model.g_action(model.r(x), model.z(x)), x))
        worst["multiplier"] = max(worst["multiplier"], _rel(
            model.chi_G(model.g_mul(g1, g2)), model.chi_G(g1) * model.chi_G(g2)))
        # densities are compared at a draw from the model at (h, g2); far in the
        # tail the relative error grows with |log p| and says nothing about the identity
        y = np.asarray(model.sample(f, ParamPoint(h, g2), 1, rng))[0]
        worst["density"] = max(worst["density"], _rel(
            sampling_density(model, y, ParamPoint(h, g2), f), specific(y, h, g2)))
    return worst


def check_self_consistency(seed: int, cases: int = 1000) -> tuple[bool, dict]:
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    out = {}
    S3 = np.diag([4.0, 1.0, 0.5])
    v = vs.v_elliptical(S3)
    f = vs.normalize_generator(vs.student(3.0, 3), v)
    for j, deco in enumerate(("v", "norm")):
        model = vs.make_model(v, 3, deco)
        out[model.label] = _consistency(
            model, f, lambda x, mu, s: vs.density(x, vs.VSphericalParams(mu, s), v, f),
            streams[j], cases)
    Sa = np.array([[2.0, 0.3, 0.0, 0.1], [0.3, 1.0, 0.2, 0.0],
                   [0.0, 0.2, 1.5, 0.4], [0.1, 0.0, 0.4, 1.2]])
    amodel = affine.make_model(4, 2, Sa)
    tgen = trace.builtin_trace_generator("exp-power-4", 8)
    fa = affine.group_generator(tgen, Sa)
    out[amodel.label] = _consistency(
        amodel, fa,
        lambda Y, M, E: affine.matrix_model_density(Y, affine.MatrixModelParams(M, E @ E.T, Sa), tgen),
        streams[2], cases)
    lam = np.array([3.0, 1.0])
    pmodel = pca.make_model(5, 2, lam)
    pgen = trace.builtin_trace_generator("student-3", 10)
    fp = pca.group_generator(pgen, lam, 5)
    out[pmodel.label] = _consistency(
        pmodel, fp, lambda X, P, g: pca.pca_sampling_density(X, pca.PCAParams(P, g, lam), pgen),
        streams[3], cases)
    worst = max(max(d.values()) for d in out.values())
    return worst <= 1e-10, {"max_rel_error": worst, "per_model": out, "cases": cases}


# ---------------------------------------------------------------------------
# suite


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    budget: float
    check: Callable


CRITERIA = [
    Criterion(1, "elliptical normalizing constant", 5.0, check_elliptical_constant),
    Criterion(2, "direction density integral and goodness of fit", 30.0, check_direction_density),
    Criterion(3, "null robustness of cross-section statistics", 300.0, check_null_robustness),
    Criterion(4, "regression residual direction is generator free", 60.0,
              check_regression_direction),
    Criterion(5, "v-spherical marginal equivalence", 60.0, check_vspherical_equivalence),
    Criterion(6, "configuration density constant and sampled shapes", 180.0,
              check_configuration_density),
    Criterion(7, "affine posterior kernel, k = 1", 30.0, check_affine_kernel),
    Criterion(8, "PCA kernel and sign cosets", 30.0, check_pca_kernel),
    Criterion(9, "framework self-consistency", 30.0, check_self_consistency),
]


def criterion_seeds(seed: int) -> dict:
    """Per-criterion integer seeds derived from the master seed."""
    children = np.random.SeedSequence(int(seed)).spawn(len(CRITERIA))
    return {c.number: int(s.generate_state(1, np.uint64)[0]) for c, s in zip(CRITERIA, children)}


def run_criterion(number: int, seed: int) -> CriterionResult:
    crit = next(c for c in CRITERIA if c.number == number)
    sub = criterion_seeds(seed)[number]
    t0 = time.perf_counter()
    passed, metrics = crit.check(sub)
    elapsed = time.perf_counter() - t0
    return CriterionResult(number, crit.name, bool(passed), metrics, crit.budget, elapsed)


def run_suite(seed: int, numbers: Optional[list] = None,
              echo: Optional[Callable[[str], None]] = print) -> list:
    out = []
    for crit in CRITERIA:
        if numbers is not None and crit.number not in numbers:
            continue
        res = run_criterion(crit.number, seed)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out


def write_report(results: list, out_dir, seed: int, config_hash: str) -> tuple[Path, Path]:
    """selftest.json (full metrics) and selftest.csv (one row per criterion)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = {"schema": analysis.SCHEMA, "kind": "selftest", "seed": int(seed),
              "config_hash": config_hash, "level": LEVEL,
              "criteria": [r.record() for r in results],
              "passed": all(r.passed for r in results)}
    jpath = analysis.write_json(out / "selftest.json", record)
    cpath = analysis.write_csv(
        out / "selftest.csv", ["criterion", "name", "passed", "budget_seconds"],
        [[r.number, r.name, int(r.passed), float(r.budget)] for r in results],
        {"schema": analysis.SCHEMA, "seed": int(seed), "config_hash": config_hash})
    return jpath, cpath
