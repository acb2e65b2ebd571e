"""Affine shape analysis of landmark figures.

A figure X (N landmarks in R^k) is reduced by the Helmert submatrix to
Y = L X (n = N - 1 rows), removing location.  The affine shape is the
column space of Y, coordinatised by V = Y2 Y1^{-1}.  The matrix model is

    Y ~ det(Sigma0)^{-k/2} det(Phi)^{-n/2} f~((Y - M)^T Sigma0^{-1} (Y - M) Phi^{-1})

with H = Mat_{n x k} acting by translation and G = GL_k acting by
Y -> Y E^T.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .batch import SampleBatch, SeedLike, make_rng
from .core import DensityGenerator, GENERAL_LINEAR, OrbitalModel
from .errors import DomainError, SamplerStallError, SingularConfigurationError
from .numerics import as_posdef, cholesky_sqrt, haar_orthogonal, log_det_pd, log_multivariate_gamma
from .trace import TraceGenerator

SINGULAR_REL = 1e-12


def helmert_submatrix(N: int) -> np.ndarray:
    """(N-1) x N matrix with orthonormal rows orthogonal to the all-ones vector.

    Row j (1-based) is (1, ..., 1, -j, 0, ..., 0) / sqrt(j (j + 1)) with j ones.
    """
    if int(N) != N or N < 2:
        raise DomainError(f"need at least two landmarks, got N={N!r}")
    L = np.zeros((N - 1, N))
    for j in range(1, N):
        L[j - 1, :j] = 1.0
        L[j - 1, j] = -j
        L[j - 1] /= math.sqrt(j * (j + 1))
    return L


def helmert_reduce(X) -> np.ndarray:
    """Y = L X for a landmark figure X of shape (N, k)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError("a landmark figure is an N x k matrix")
    N, k = X.shape
    if N < k + 2:
        raise DomainError(f"need N >= k + 2 landmarks (N={N}, k={k})")
    return helmert_submatrix(N) @ X


def read_landmarks(path) -> np.ndarray:
    """One landmark per CSV row, k numeric columns; a non-numeric first row is a header."""
    rows = []
    with open(Path(path), newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if i == 0:
                    continue
                raise DomainError(f"non-numeric landmark row {i + 1} in {path}") from None
    if len({len(r) for r in rows}) != 1:
        raise DomainError(f"empty or ragged landmark file {path}")
    return np.array(rows, dtype=float)


def is_regular(Y1) -> bool:
    """Scale-aware nonsingularity test |det Y1| > 1e-12 (||Y1||_F / sqrt(k))^k."""
    Y1 = np.asarray(Y1, dtype=float)
    k = Y1.shape[-1]
    scale = np.linalg.norm(Y1) / math.sqrt(k)
    if not np.isfinite(scale) or scale == 0:
        return False
    return bool(abs(np.linalg.det(Y1)) > SINGULAR_REL * scale ** k)


def configuration_coords(Y, k: Optional[int] = None) -> np.ndarray:
    """V = Y2 Y1^{-1}, where Y1 holds the first k rows of Y."""
    Y = np.asarray(Y, dtype=float)
    k = Y.shape[-1] if k is None else k
    Y1, Y2 = Y[..., :k, :], Y[..., k:, :]
    if Y.ndim == 2:
        if not is_regular(Y1):
            raise SingularConfigurationError("leading k x k block Y1 is singular")
        return np.linalg.solve(Y1.T, Y2.T).T
    dets = np.abs(np.linalg.det(Y1))
    scale = np.linalg.norm(Y1, axis=(-2, -1)) / math.sqrt(k)
    if np.any(dets <= SINGULAR_REL * scale ** k):
        raise SingularConfigurationError("a leading block Y1 in the batch is singular")
    return np.swapaxes(np.linalg.solve(np.swapaxes(Y1, -1, -2), np.swapaxes(Y2, -1, -2)), -1, -2)


def embed(V) -> np.ndarray:
    """Z = (I_k; V)."""
    V = np.asarray(V, dtype=float)
    k = V.shape[-1]
    eye = np.broadcast_to(np.eye(k), (*V.shape[:-2], k, k))
    return np.concatenate([eye, V], axis=-2)


def column_projector(Y) -> np.ndarray:
    """Orthogonal projector onto the column space of Y; an affine-shape invariant."""
    Y = np.asarray(Y, dtype=float)
    Q, _ = np.linalg.qr(Y)
    return Q @ np.swapaxes(Q, -1, -2)


MINOR_LIMIT = 20_000


def gram_logdet(Z, Sigma0) -> np.ndarray:
    """log det(Z^T Sigma0^{-1} Z) for a (batch of) n x k matrices Z.

    With W = Ls^{-1} Z the determinant is the sum of squared k x k minors of W
    (Cauchy-Binet).  Every term is nonnegative, so nothing cancels even when
    Z has entries of wildly different size; forming the Gram matrix first
    would lose its small eigenvalues.  Falls back to slogdet when there are
    more than 20000 minors.
    """
    S = as_posdef(Sigma0)
    Z = np.asarray(Z, dtype=float)
    n, k = Z.shape[-2:]
    L = cholesky_sqrt(S)
    W = np.linalg.solve(L, Z) if Z.ndim == 2 else np.einsum("ij,...jk->...ik", np.linalg.inv(L), Z)
    if math.comb(n, k) > MINOR_LIMIT:
        return np.linalg.slogdet(np.swapaxes(W, -1, -2) @ W)[1]
    rows = np.array(list(itertools.combinations(range(n), k)))
    minors = np.linalg.det(W[..., rows, :])
    with np.errstate(over="ignore"):
        total = np.sum(minors * minors, axis=-1)
    with np.errstate(divide="ignore"):
        return np.log(total)


def config_log_constant(Sigma0, n: int, k: int) -> float:
    """log of Gamma_k(n/2) / (pi^{k(n-k)/2} det(Sigma0)^{k/2} Gamma_k(k/2))."""
    if n - k < 1:
        raise DomainError("need n - k >= 1")
    return (log_multivariate_gamma(k, n / 2) - log_multivariate_gamma(k, k / 2)
            - k * (n - k) / 2 * math.log(math.pi) - k / 2 * log_det_pd(Sigma0))


def config_constant(Sigma0, n: int, k: int) -> float:
    return math.exp(config_log_constant(Sigma0, n, k))


def config_density(V, Sigma0, n: int, k: int):
    """Central (M = 0) configuration density c [det(Z^T Sigma0^{-1} Z)]^{-n/2}, Z = (I; V).

    The same for every trace-form generator.  ``V`` may be a batch (..., n-k, k).
    """
    S = as_posdef(Sigma0)
    V = np.asarray(V, dtype=float)
    if S.shape != (n, n) or V.shape[-2:] != (n - k, k):
        raise DomainError(f"dimension mismatch: V {V.shape[-2:]}, Sigma0 {S.shape}, n={n}, k={k}")
    logdet = gram_logdet(embed(V), S)
    return np.exp(config_log_constant(S, n, k) - n / 2 * logdet)


@dataclass(frozen=True)
class MonteCarloIntegral:
    value: float
    error: float
    draws: int


def config_normalization_mc(Sigma0, n: int, k: int, draws: int, rng: np.random.Generator,
                            df: float = 0.5, batch: int = 100_000) -> MonteCarloIntegral:
    """Importance-sampling estimate of int det(Z^T Sigma0^{-1} Z)^{-n/2} dV.

    The proposal is a multivariate t with ``df`` degrees of freedom on
    R^{(n-k) k}.  The integrand has Cauchy-like tails along rank-one
    directions, so the weights have finite variance only for df < 1.
    """
    S = as_posdef(Sigma0)
    d = (n - k) * k
    log_q0 = (math.lgamma((df + d) / 2) - math.lgamma(df / 2)
              - d / 2 * math.log(df * math.pi))
    s1 = s2 = 0.0
    done = 0
    while done < draws:
        m = min(batch, draws - done)
        w = rng.chisquare(df, m) / df
        V = rng.standard_normal((m, d)) / np.sqrt(w)[:, None]
        log_q = log_q0 - (df + d) / 2 * np.log1p(np.einsum("ij,ij->i", V, V) / df)
        logdet = gram_logdet(embed(V.reshape(m, n - k, k)), S)
        wt = np.exp(-n / 2 * logdet - log_q)
        s1 += wt.sum()
        s2 += (wt * wt).sum()
        done += m
    mean = s1 / done
    var = max(s2 / done - mean * mean, 0.0)
    return MonteCarloIntegral(mean, math.sqrt(var / done), done)


@dataclass(frozen=True)
class MatrixModelParams:
    """Location M (n x k), scale Phi (k x k) and known Sigma0 (n x n).

    ``Phi_sqrt`` is the canonical lower Cholesky factor; any E with E E^T =
    Phi describes the same distribution.
    """

    M: np.ndarray
    Phi: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        Phi = as_posdef(self.Phi)
        S = as_posdef(self.Sigma0)
        n, k = M.shape
        if Phi.shape != (k, k) or S.shape != (n, n):
            raise DomainError("M, Phi and Sigma0 have inconsistent shapes")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "Sigma0", S)

    @classmethod
    def from_cholesky(cls, M, Phi_sqrt, Sigma0):
        T = np.asarray(Phi_sqrt, dtype=float)
        return cls(M, T @ T.T, Sigma0)

    @property
    def Phi_sqrt(self) -> np.ndarray:
        return cholesky_sqrt(self.Phi)

    @property
    def shape(self) -> tuple:
        return self.M.shape


def matrix_model_density(Y, params: MatrixModelParams, gen: TraceGenerator):
    """det(Sigma0)^{-k/2} det(Phi)^{-n/2} h(tr((Y-M)^T Sigma0^{-1} (Y-M) Phi^{-1})).

    The trace is ||Ls^{-1} (Y - M) Lp^{-T}||_F^2 with Cholesky factors Ls, Lp,
    which avoids squaring the condition number of Phi.
    """
    n, k = params.shape
    W = np.asarray(Y, dtype=float) - params.M
    Ls = cholesky_sqrt(params.Sigma0)
    Lp = params.Phi_sqrt
    A = solve_triangular(Ls, W, lower=True)
    B = solve_triangular(Lp, A.T, lower=True)
    t = float(np.sum(B * B))
    log_norm = -k / 2 * log_det_pd(params.Sigma0) - n / 2 * log_det_pd(params.Phi)
    return math.exp(log_norm) * gen(t)


def sample_matrix_model(count: int, params: MatrixModelParams, gen: TraceGenerator,
                        rng: SeedLike) -> SampleBatch:
    """Y = M + Sigma0^{1/2} U (Phi^{1/2})^T with U ~ h(tr U^T U).

    Draws whose leading block is singular are redrawn and counted.
    """
    if not isinstance(gen, TraceGenerator):
        raise DomainError("the matrix model needs a trace-form generator f~(W) = h(tr W)")
    gen_rng, seed = make_rng(rng)
    n, k = params.shape
    Ls = cholesky_sqrt(params.Sigma0)
    Lp = params.Phi_sqrt

    def draw(m):
        U = gen.sample_unit(m, (n, k), gen_rng)
        return params.M + Ls @ U @ Lp.T

    Y = draw(count) if count else np.empty((0, n, k))
    resampled = 0
    if count:
        bad = np.array([not is_regular(y[:k]) for y in Y])
        while bad.any():
            resampled += int(bad.sum())
            Y[bad] = draw(int(bad.sum()))
            bad = np.array([not is_regular(y[:k]) for y in Y])
        if resampled / count > 1e-3:
            raise SamplerStallError(f"singular-draw resample rate {resampled / count:.2e} exceeds 0.1%")
    return SampleBatch(
        draws=Y, seed=seed,
        meta={"model": "affine-shape", "generator": gen.label, "n": n, "k": k,
              "N": n + 1, "M": params.M, "Phi": params.Phi, "Sigma0": params.Sigma0},
        resampled=resampled,
    )


def affine_posterior_kernel(Y, M, Sigma0) -> float:
    """|det(Y1 - M1)|^{-n} [det(Z^T Sigma0^{-1} Z)]^{-n/2}, Z = (I; (Y2 - M2)(Y1 - M1)^{-1})."""
    W = np.asarray(Y, dtype=float) - np.asarray(M, dtype=float)
    n, k = W.shape
    V = configuration_coords(W, k)
    logdet_gram = float(gram_logdet(embed(V), Sigma0))
    _, logdet_w1 = np.linalg.slogdet(W[:k])
    return math.exp(-n * logdet_w1 - n / 2 * logdet_gram)


def group_generator(gen: TraceGenerator, Sigma0) -> DensityGenerator:
    """f(E) = det(Sigma0)^{-k/2} h(tr E E^T) on GL_k (accepts batches of E)."""
    S = as_posdef(Sigma0)
    n = S.shape[0]
    k = gen.dim // n
    const = math.exp(-k / 2 * log_det_pd(S))

    def f(E):
        E = np.asarray(E, dtype=float)
        return const * gen.h(np.einsum("...ij,...ij->...", E, E))

    return DensityGenerator(f, gen.label, source=gen)


def make_model(n: int, k: int, Sigma0=None) -> OrbitalModel:
    """Affine-shape orbital model: r(Y) = Y1^T, z(Y) = (I; Y2 Y1^{-1}), s(Z) = (Z^T Sigma0^{-1} Z)^{1/2}."""
    if n - k < 1:
        raise DomainError("need n - k >= 1")
    S = np.eye(n) if Sigma0 is None else as_posdef(Sigma0)

    def r(Y):
        return np.array(np.asarray(Y, dtype=float)[:k].T)

    def z_map(Y):
        return embed(configuration_coords(Y, k))

    Ls = cholesky_sqrt(S)

    def s(Z):
        # lower Cholesky factor of Z^T Sigma0^{-1} Z from a QR of Ls^{-1} Z,
        # which avoids forming the Gram matrix
        R = np.linalg.qr(solve_triangular(Ls, np.asarray(Z, dtype=float), lower=True), mode="r")
        signs = np.sign(np.diag(R))
        signs[signs == 0] = 1.0
        return (signs[:, None] * R).T

    def chi_G(E):
        return np.abs(np.linalg.det(np.asarray(E, dtype=float))) ** n

    def sampler(f, theta, count, rng):
        params = MatrixModelParams(theta.h, np.asarray(theta.g) @ np.asarray(theta.g).T, S)
        return sample_matrix_model(count, params, f.source, rng).draws

    def random_g(rng):
        # condition number at most e^2, so test identities are not swamped by rounding
        Q1 = haar_orthogonal(k, rng)
        Q2 = haar_orthogonal(k, rng)
        return (Q1 * np.exp(rng.uniform(-1.0, 1.0, k))) @ Q2

    return OrbitalModel(
        label=f"affine-shape(n={n},k={k})",
        point_shape=(n, k),
        r=r,
        s=s,
        chi_H=lambda M: 1.0,
        chi_G=chi_G,
        delta_G=lambda E: 1.0,
        h_action=lambda M, Y: np.asarray(Y, dtype=float) + M,
        h_inverse=lambda M: -np.asarray(M, dtype=float),
        g_action=lambda E, Y: np.asarray(Y, dtype=float) @ np.swapaxes(np.asarray(E, dtype=float), -1, -2),
        g_inverse=lambda E: np.linalg.inv(np.asarray(E, dtype=float)),
        g_mul=lambda A, B: np.asarray(A, dtype=float) @ np.asarray(B, dtype=float),
        is_member=lambda Y: is_regular(np.asarray(Y, dtype=float)[:k]),
        h_identity=np.zeros((n, k)),
        g_identity=np.eye(k),
        group=GENERAL_LINEAR,
        group_dim=k,
        z_map=z_map,
        sampler=sampler,
        random_h=lambda rng: rng.standard_normal((n, k)),
        random_g=random_g,
        random_point=lambda rng: rng.standard_normal((n, k)),
        extra={"n": n, "k": k, "Sigma0": S},
    )


__all__ = [
    "helmert_submatrix", "helmert_reduce", "read_landmarks", "is_regular",
    "configuration_coords", "embed", "column_projector", "config_constant",
    "config_log_constant", "config_density", "gram_logdet", "MonteCarloIntegral", "config_normalization_mc", "MatrixModelParams", "matrix_model_density",
    "sample_matrix_model", "affine_posterior_kernel", "group_generator", "make_model",
]
