"""PCA with a known eigenvalue pattern.

X (n x k) has density det(Sigma)^{-n/2} f~(tr(X Sigma^{-1} X^T)) with
Sigma = g^2 P Lambda0 P^T.  The eigenvector matrix P is identified only up
to column signs, so the interest parameter is the coset P{P0} in O_k / {P0}
and the scale g is a nuisance parameter.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .batch import SampleBatch, SeedLike, make_rng
from .core import DensityGenerator, OrbitalModel, POSITIVE_REALS
from .errors import DomainError, ExcludedPointError
from .numerics import haar_orthogonal
from .trace import TraceGenerator

ORTHO_TOL = 1e-10
TIE_REL = 1e-8


def check_lambda0(Lambda0, strict: bool = True) -> np.ndarray:
    """Return the diagonal of Lambda0 after checking l_1 > ... > l_k > 0.

    With ``strict=False`` only positivity is required (ties allowed).
    """
    lam = np.asarray(Lambda0, dtype=float)
    if lam.ndim == 2:
        if np.any(lam != np.diag(np.diag(lam))):
            raise DomainError("Lambda0 must be diagonal")
        lam = np.diag(lam)
    lam = np.atleast_1d(lam).astype(float)
    if np.any(lam <= 0):
        raise DomainError("Lambda0 entries must be positive")
    if strict and lam.size > 1 and np.any(lam[:-1] - lam[1:] < TIE_REL * lam[0]):
        raise DomainError("Lambda0 entries must be strictly decreasing (no near-ties)")
    return lam


def check_orthogonal(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DomainError("P must be square")
    if np.max(np.abs(P.T @ P - np.eye(P.shape[0]))) > ORTHO_TOL:
        raise DomainError("P is not orthogonal")
    return P


@dataclass(frozen=True)
class PCAParams:
    P: np.ndarray
    g: float
    Lambda0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", check_orthogonal(self.P))
        object.__setattr__(self, "Lambda0", check_lambda0(self.Lambda0))
        if not (np.isfinite(self.g) and self.g > 0):
            raise DomainError("scale g must be positive")
        if self.P.shape[0] != self.Lambda0.size:
            raise DomainError("P and Lambda0 sizes differ")

    @property
    def Sigma(self) -> np.ndarray:
        return self.g ** 2 * (self.P * self.Lambda0) @ self.P.T


@dataclass(frozen=True)
class SignCoset:
    """Canonical representative of P{P0}: each column's largest-|.| entry is positive."""

    representative: np.ndarray


def canonicalize_sign_coset(P) -> SignCoset:
    P = check_orthogonal(P)
    # argmax returns the first (lowest row) index on ties
    lead = np.argmax(np.abs(P), axis=0)
    signs = np.sign(P[lead, np.arange(P.shape[1])])
    signs[signs == 0] = 1.0
    return SignCoset(P * signs)


def sign_matrices(k: int):
    """All 2^k diagonal sign matrices."""
    for eps in itertools.product((1.0, -1.0), repeat=k):
        yield np.diag(eps)


def pca_r(X, Lambda0) -> float:
    """{tr(X Lambda0^{-1} X^T)}^{1/2}; any positive diagonal Lambda0 is accepted."""
    lam = check_lambda0(Lambda0, strict=False)
    X = np.asarray(X, dtype=float)
    val = np.sqrt(np.einsum("...ij,j,...ij->...", X, 1.0 / lam, X))
    if np.any(val == 0):
        raise ExcludedPointError("r(X) is undefined at X = 0")
    return float(val) if np.ndim(val) == 0 else val


def pca_sampling_density(X, params: PCAParams, gen: TraceGenerator):
    """det(Sigma)^{-n/2} h(tr(X Sigma^{-1} X^T))."""
    X = np.asarray(X, dtype=float)
    n, k = X.shape[-2:]
    if not np.any(X):
        raise ExcludedPointError("density is evaluated on X != 0 only")
    lam = params.Lambda0
    XP = X @ params.P
    t = np.einsum("...ij,j,...ij->...", XP, 1.0 / lam, XP) / params.g ** 2
    log_det = 2 * k * math.log(params.g) + float(np.sum(np.log(lam)))
    return math.exp(-n / 2 * log_det) * gen.h(t)


def pca_marginal_kernel(X, coset, Lambda0, a: float = 0.0) -> float:
    """{tr(X P Lambda0^{-1} P^T X^T)}^{(a - kn)/2}.

    a = 0 (the invariant prior dg/g) gives the exponent -kn/2; other a
    correspond to the relatively invariant prior g^a dg/g.
    """
    P = coset.representative if isinstance(coset, SignCoset) else check_orthogonal(coset)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    r = pca_r(X @ P, Lambda0)
    return r ** (a - k * n)


def group_generator(gen: TraceGenerator, Lambda0, n: int) -> DensityGenerator:
    """f(r) = det(Lambda0)^{-n/2} h(r^2) on R_{>0}."""
    lam = check_lambda0(Lambda0)
    const = math.exp(-n / 2 * float(np.sum(np.log(lam))))
    return DensityGenerator(lambda r: const * gen.h(np.square(r)), gen.label, source=gen)


def sample_pca(count: int, params: PCAParams, gen: TraceGenerator, n: int,
               rng: SeedLike) -> SampleBatch:
    """X = g U Lambda0^{1/2} P^T with U ~ h(tr U^T U)."""
    gen_rng, seed = make_rng(rng)
    k = params.P.shape[0]
    U = gen.sample_unit(count, (n, k), gen_rng) if count else np.empty((0, n, k))
    X = params.g * (U * np.sqrt(params.Lambda0)) @ params.P.T
    return SampleBatch(
        draws=X, seed=seed,
        meta={"model": "pca", "generator": gen.label, "n": n, "k": k,
              "P": params.P, "g": params.g, "Lambda0": params.Lambda0},
    )


def make_model(n: int, k: int, Lambda0) -> OrbitalModel:
    """H = O_k acting by X -> X P^T, G = R_{>0} by scaling; r = pca_r, s = 1."""
    lam = check_lambda0(Lambda0)
    if lam.size != k:
        raise DomainError("Lambda0 must have k entries")

    def g_action(g, X):
        g = np.asarray(g, dtype=float)
        return g[..., None, None] * X if g.ndim else g * np.asarray(X, dtype=float)

    def sampler(f, theta, count, rng):
        return sample_pca(count, PCAParams(theta.h, theta.g, lam), f.source, n, rng).draws

    return OrbitalModel(
        label=f"pca(n={n},k={k})",
        point_shape=(n, k),
        r=lambda X: pca_r(X, lam),
        s=lambda Z: 1.0,
        chi_H=lambda P: 1.0,
        chi_G=lambda g: np.asarray(g, dtype=float) ** (k * n),
        delta_G=lambda g: 1.0,
        h_action=lambda P, X: np.asarray(X, dtype=float) @ np.asarray(P, dtype=float).T,
        h_inverse=lambda P: np.asarray(P, dtype=float).T,
        g_action=g_action,
        g_inverse=lambda g: 1.0 / np.asarray(g, dtype=float),
        g_mul=lambda a, b: np.asarray(a, dtype=float) * b,
        is_member=lambda X: bool(np.any(np.asarray(X) != 0) and np.all(np.isfinite(X))),
        h_identity=np.eye(k),
        g_identity=1.0,
        group=POSITIVE_REALS,
        sampler=sampler,
        random_h=lambda rng: haar_orthogonal(k, rng),
        random_g=lambda rng: float(np.exp(rng.normal(0.0, 0.7))),
        random_point=lambda rng: rng.standard_normal((n, k)),
        extra={"n": n, "k": k, "Lambda0": lam},
    )


__all__ = [
    "PCAParams", "SignCoset", "check_lambda0", "check_orthogonal", "canonicalize_sign_coset",
    "sign_matrices", "pca_r", "pca_sampling_density", "pca_marginal_kernel",
    "group_generator", "sample_pca", "make_model",
]
