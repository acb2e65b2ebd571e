"""Command-line front end.

    orbitbayes <subcommand> [--config FILE] [--seed N] [--out DIR] [--threads N] [--tolerance X]

Exit status: 0 success, 2 invalid input or configuration, 3 numerical
failure, 4 a failed statistical check in ``selftest``.  Errors are reported
on standard error as one JSON object.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import acceptance, affine, analysis, pca, trace
from . import config as cfgmod
from . import vspherical as vs
from .core import power_multiplier
from .errors import (
    ConfigError, DivergenceError, DomainError, EnvelopeError, IntegrabilityError,
    InvarianceViolationError, NonConvergenceError, SamplerStallError,
)
from .numerics import QuadratureSpec

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_STATISTIC = 4

SUBCOMMANDS = ("sample", "density", "null-robustness", "marginal-equivalence",
               "affine-config", "pca-kernel", "selftest")


# ---------------------------------------------------------------------------
# building objects from a config


def _v_function(m: cfgmod.ModelConfig):
    if m.v == "euclidean":
        return vs.v_euclidean(m.n)
    if m.v == "elliptical":
        if m.Sigma0 is None:
            raise ConfigError("model.Sigma0 is required for the elliptical v-function")
        return vs.v_elliptical(np.asarray(m.Sigma0, dtype=float))
    if m.v == "lq":
        return vs.v_lq(float(m.q))
    if m.v == "max":
        return vs.v_max()
    raise ConfigError(f"model.v must be euclidean, elliptical, lq or max, got {m.v!r}")


class Setup:
    """Model, generators and parameter point resolved from a config."""

    def __init__(self, cfg: cfgmod.ExperimentConfig):
        self.cfg = cfg
        m = cfg.model
        self.kind = m.kind
        if m.kind == "vspherical":
            self.v = _v_function(m)
            self.model = vs.make_model(self.v, m.n)
            self.gens = [vs.normalize_generator(vs.builtin_generator(g, m.n), self.v, m.n)
                         for g in cfg.generators]
            self.h = np.zeros(m.n) if m.location is None else np.asarray(m.location, dtype=float)
            self.g = float(m.scale)
            if self.h.shape != (m.n,):
                raise ConfigError(f"model.location must have {m.n} entries")
        elif m.kind == "affine-shape":
            self.Sigma0 = np.eye(m.n) if m.Sigma0 is None else np.asarray(m.Sigma0, dtype=float)
            self.model = affine.make_model(m.n, m.k, self.Sigma0)
            self.trace_gens = [trace.builtin_trace_generator(g, m.n * m.k) for g in cfg.generators]
            self.gens = [affine.group_generator(t, self.Sigma0) for t in self.trace_gens]
            self.h = (np.zeros((m.n, m.k)) if m.location is None
                      else np.asarray(m.location, dtype=float))
            scale = np.asarray(m.scale, dtype=float)
            self.g = scale * np.eye(m.k) if scale.ndim == 0 else scale
            if self.h.shape != (m.n, m.k) or self.g.shape != (m.k, m.k):
                raise ConfigError("model.location must be n x k and model.scale k x k")
        else:
            if m.Lambda0 is None:
                raise ConfigError("model.Lambda0 is required for the pca model")
            self.Lambda0 = pca.check_lambda0(np.asarray(m.Lambda0, dtype=float))
            self.model = pca.make_model(m.n, m.k, self.Lambda0)
            self.trace_gens = [trace.builtin_trace_generator(g, m.n * m.k) for g in cfg.generators]
            self.gens = [pca.group_generator(t, self.Lambda0, m.n) for t in self.trace_gens]
            self.h = np.eye(m.k) if m.location is None else np.asarray(m.location, dtype=float)
            pca.check_orthogonal(self.h)
            self.g = float(m.scale)

    def statistic(self, label: str) -> analysis.Statistic:
        if label == "cross-section":
            return analysis.cross_section_statistic(self.model)
        if label == "residual-direction":
            if self.cfg.design is None:
                raise ConfigError("the residual-direction statistic needs a design matrix")
            return analysis.residual_direction_statistic(np.asarray(self.cfg.design, dtype=float))
        try:
            return analysis.BUILTIN_STATISTICS[label]()
        except KeyError:
            raise ConfigError(f"unknown statistic {label!r}") from None


def _provenance(cfg: cfgmod.ExperimentConfig) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed}


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(cfg, out: Path) -> int:
    st = Setup(cfg)
    count = cfg.sampling.count
    gen = st.gens[0]
    if st.kind == "vspherical":
        batch = vs.sample(count, vs.VSphericalParams(st.h, st.g), st.v, gen, cfg.seed)
    elif st.kind == "affine-shape":
        params = affine.MatrixModelParams(st.h, st.g @ st.g.T, st.Sigma0)
        batch = affine.sample_matrix_model(count, params, st.trace_gens[0], cfg.seed)
    else:
        params = pca.PCAParams(st.h, st.g, st.Lambda0)
        batch = pca.sample_pca(count, params, st.trace_gens[0], cfg.model.n, cfg.seed)
    prov = _provenance(cfg)
    batch.to_csv(out / "samples.csv", extra_header=prov)
    batch.to_jsonl(out / "samples.jsonl", extra_header=prov)
    print(f"wrote {count} draws to {out / 'samples.csv'} and {out / 'samples.jsonl'}")
    return EXIT_OK


def _lhs_points(dim: int, count: int, box: float, seed: int) -> np.ndarray:
    return (2 * analysis._lhs(dim, count, seed) - 1) * box


def cmd_density(cfg, out: Path) -> int:
    st = Setup(cfg)
    d = cfg.density
    m = cfg.model
    rows = []
    if st.kind == "vspherical":
        if m.n == 2:
            axis = np.linspace(-d.box, d.box, d.points)
            pts = np.array([[a, b] for a in axis for b in axis]) + st.h
        else:
            pts = _lhs_points(m.n, d.points, d.box, cfg.seed) + st.h
        params = vs.VSphericalParams(st.h, st.g)
        for p in pts:
            if np.all(p == st.h):
                continue
            rows.append([*p, float(vs.density(p, params, st.v, st.gens[0]))])
        header = [f"x_{i + 1}" for i in range(m.n)] + ["density"]
    elif st.kind == "affine-shape":
        dim = (m.n - m.k) * m.k
        pts = _lhs_points(dim, d.points, d.box, cfg.seed)
        vals = affine.config_density(pts.reshape(-1, m.n - m.k, m.k), st.Sigma0, m.n, m.k)
        rows = [[*p, float(val)] for p, val in zip(pts, vals)]
        header = [f"v_{i + 1}" for i in range(dim)] + ["density"]
    else:
        pts = _lhs_points(m.n * m.k, d.points, d.box, cfg.seed)
        params = pca.PCAParams(st.h, st.g, st.Lambda0)
        rows = [[*p, float(pca.pca_sampling_density(p.reshape(m.n, m.k), params,
                                                    st.trace_gens[0]))] for p in pts]
        header = [f"x_{i + 1}" for i in range(m.n * m.k)] + ["density"]
    pre = {"schema": analysis.SCHEMA, "kind": "density", "model": st.model.label,
           "generator": st.gens[0].label, **_provenance(cfg)}
    path = analysis.write_csv(out / "density.csv", header, rows, pre)
    print(f"wrote {len(rows)} density values to {path}")
    return EXIT_OK


def cmd_null_robustness(cfg, out: Path) -> int:
    st = Setup(cfg)
    if len(st.gens) != 2:
        raise ConfigError("null-robustness needs two generators")
    stat = st.statistic(cfg.statistic)
    rep = analysis.null_robustness_test(
        st.model, stat, st.gens[0], st.gens[1], st.h, st.g, cfg.sampling.count, cfg.seed,
        permutations=cfg.sampling.permutations, directions=cfg.sampling.directions)
    rep = dataclasses.replace(rep, meta=_provenance(cfg))
    rep.to_json(out / "robustness.json")
    rep.to_csv(out / "robustness.csv")
    print(f"energy distance {rep.energy_distance:.6g}, p-value {rep.pvalue:.4f} "
          f"({'no evidence against equality' if rep.passed() else 'rejected'} at level 0.01)")
    return EXIT_OK


def cmd_marginal_equivalence(cfg, out: Path) -> int:
    st = Setup(cfg)
    if len(st.gens) != 2:
        raise ConfigError("marginal-equivalence needs two generators")
    e = cfg.equivalence
    m = cfg.model
    quad = QuadratureSpec(rtol=cfg.quadrature.rtol)
    mult = None
    kernel = None
    if st.kind == "vspherical":
        grid = analysis.vspherical_grid(m.n, cfg.seed, count=e.grid_points, box=e.box)
        mult = power_multiplier(e.multiplier)
        kernel = (lambda x, mu: vs.vspherical_marginal_kernel(x, mu, st.v, e.multiplier))
    elif st.kind == "pca":
        grid = analysis.pca_grid(m.n, m.k, cfg.seed, count=e.grid_points, box=e.box)
        mult = power_multiplier(e.multiplier)
        kernel = (lambda X, P: pca.pca_marginal_kernel(X, P, st.Lambda0, e.multiplier))
    else:
        if e.multiplier != 0:
            raise ConfigError("the affine-shape check uses the invariant prior (multiplier 0)")
        side = max(1, int(math.isqrt(e.grid_points)))
        grid = analysis.affine_grid(m.n, m.k, cfg.seed, rows=side, cols=side, box=e.box)
        kernel = analysis.affine_kernel(st.Sigma0)
    rep = analysis.marginal_equivalence_check(
        st.model, st.gens[0], st.gens[1], grid, m=mult, quad=quad, rng=cfg.seed,
        kernel=kernel, tolerance=e.tolerance, draws=cfg.sampling.mc_draws,
        workers=cfg.threads)
    rep = dataclasses.replace(rep, seed=cfg.seed, meta=_provenance(cfg))
    rep.to_json(out / "equivalence.json")
    rep.to_csv(out / "equivalence.csv")
    err = max(max(rep.error_1), max(rep.error_2))
    print(f"log-ratio spreads {rep.spread_1:.3g} and {rep.spread_2:.3g} over {len(grid)} points "
          f"(tolerance {rep.tolerance:g}, largest relative integration error {err:.2g}): "
          f"{'equivalent' if rep.passed() else 'NOT equivalent'}")
    return EXIT_OK


def cmd_affine_config(cfg, out: Path) -> int:
    m = cfg.model
    if m.kind != "affine-shape":
        raise ConfigError("affine-config needs model.kind: affine-shape")
    S = np.eye(m.n) if m.Sigma0 is None else np.asarray(m.Sigma0, dtype=float)
    exact = affine.config_constant(S, m.n, m.k)
    mc = affine.config_normalization_mc(S, m.n, m.k, cfg.sampling.mc_draws,
                                        np.random.default_rng(cfg.seed))
    rows = []
    for path in cfg.landmarks:
        X = affine.read_landmarks(path)
        Y = affine.helmert_reduce(X)
        if Y.shape != (m.n, m.k):
            raise ConfigError(f"{path}: expected {m.n + 1} landmarks in R^{m.k}, got {X.shape}")
        V = affine.configuration_coords(Y, m.k)
        rows.append([Path(path).name, *V.ravel(), float(affine.config_density(V, S, m.n, m.k))])
    record = {"schema": analysis.SCHEMA, "kind": "affine-config", "n": m.n, "k": m.k,
              "exact_constant": exact, "mc_constant": 1.0 / mc.value,
              "mc_integral": mc.value, "mc_stderr": mc.error, "mc_draws": mc.draws,
              "rel_error": abs(1.0 / mc.value / exact - 1.0),
              "landmarks": [{"file": r[0], "V": r[1:-1], "density": r[-1]} for r in rows],
              **_provenance(cfg)}
    analysis.write_json(out / "affine_config.json", record)
    header = ["file"] + [f"v_{i + 1}" for i in range((m.n - m.k) * m.k)] + ["density"]
    analysis.write_csv(out / "affine_config.csv", header, rows,
                 {"schema": analysis.SCHEMA, "exact_constant": exact, **_provenance(cfg)})
    print(f"constant {exact:.10g}; Monte Carlo {1.0 / mc.value:.6g} "
          f"(relative difference {record['rel_error']:.3g}); {len(rows)} landmark files")
    return EXIT_OK


def cmd_pca_kernel(cfg, out: Path) -> int:
    st = Setup(cfg)
    if st.kind != "pca":
        raise ConfigError("pca-kernel needs model.kind: pca")
    m = cfg.model
    a = cfg.equivalence.multiplier
    params = pca.PCAParams(st.h, st.g, st.Lambda0)
    X = pca.sample_pca(1, params, st.trace_gens[0], m.n, cfg.seed).draws[0]
    rows = []
    if m.k == 2:
        for theta in np.linspace(0.0, math.pi, cfg.density.points, endpoint=False):
            c, s = math.cos(theta), math.sin(theta)
            P = np.array([[c, -s], [s, c]])
            rep = pca.canonicalize_sign_coset(P).representative
            val = pca.pca_marginal_kernel(X, P, st.Lambda0, a)
            rows.append([theta, val, math.log(val), *rep.ravel()])
        header = ["theta", "kernel", "log_kernel"] + [f"p_{i + 1}" for i in range(4)]
    else:
        for i, D in enumerate(pca.sign_matrices(m.k)):
            P = st.h @ D
            val = pca.pca_marginal_kernel(X, P, st.Lambda0, a)
            rows.append([i, val, math.log(val), *pca.canonicalize_sign_coset(P).representative.ravel()])
        header = ["flip", "kernel", "log_kernel"] + [f"p_{i + 1}" for i in range(m.k * m.k)]
    pre = {"schema": analysis.SCHEMA, "kind": "pca-kernel", "X": X, "Lambda0": st.Lambda0,
           "multiplier": a, **_provenance(cfg)}
    path = analysis.write_csv(out / "pca_kernel.csv", header, rows, pre)
    print(f"wrote {len(rows)} kernel values to {path}")
    return EXIT_OK


def cmd_selftest(cfg, out: Path, only: Optional[list] = None) -> int:
    results = acceptance.run_suite(cfg.seed, numbers=only)
    acceptance.write_report(results, out, cfg.seed, cfg.hash())
    failed = [r.number for r in results if not r.passed]
    if failed:
        print(f"failed criteria: {failed}")
        return EXIT_STATISTIC
    print(f"all {len(results)} criteria passed")
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "density": cmd_density,
    "null-robustness": cmd_null_robustness,
    "marginal-equivalence": cmd_marginal_equivalence,
    "affine-config": cmd_affine_config,
    "pca-kernel": cmd_pca_kernel,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitbayes",
        description="Group-invariant sampling models: samplers, kernels and verification suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sample": "draw a sample batch (CSV and JSONL)",
        "density": "tabulate a density on a grid",
        "null-robustness": "energy-distance test of generator independence",
        "marginal-equivalence": "numeric nuisance marginals against the closed kernel",
        "affine-config": "configuration density constant and landmark densities",
        "pca-kernel": "PCA marginal kernel table",
        "selftest": "run the acceptance suite",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--seed", type=int, help="master seed (required here or in the config)")
        p.add_argument("--out", help=f"output directory (default ${cfgmod.OUT_ENV} or "
                                     f"./{cfgmod.DEFAULT_OUT})")
        p.add_argument("--threads", type=int, help="worker threads for independent grid points")
        p.add_argument("--tolerance", type=float, help="quadrature relative tolerance")
        if name == "selftest":
            p.add_argument("--only", type=int, nargs="+", metavar="N",
                           help="run only these criteria")
    return parser


def _fail(exc: BaseException, code: int) -> int:
    diag = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(diag), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config, {"seed": args.seed, "out": args.out,
                                         "threads": args.threads, "tolerance": args.tolerance})
        out = cfg.out_dir()
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "selftest":
            return cmd_selftest(cfg, out, args.only)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, DomainError) as exc:
        return _fail(exc, EXIT_INVALID)
    except (NonConvergenceError, DivergenceError, IntegrabilityError, SamplerStallError,
            EnvelopeError, InvarianceViolationError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
