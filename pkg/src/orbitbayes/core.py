"""Orbital models: the generic group-invariant sampling density and its kernels.

A model is a bundle of plain functions.  Points of the sample space, elements
of the interest group H and of the nuisance group G are whatever concrete
objects the model module chooses (vectors, matrices, positive reals); the
functions here only compose the model's maps.

For G = R_{>0} and G = GL_k the group operations are expected to broadcast
over a leading batch axis, so a whole quadrature panel or importance sample
of nuisance values can be pushed through :func:`sampling_density` at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import DomainError, ExcludedPointError
from .numerics import QuadratureSpec, integrate_positive

__all__ = [
    "OrbitalModel",
    "DensityGenerator",
    "ParamPoint",
    "GroupIntegral",
    "sampling_density",
    "cross_section_density",
    "normalizing_constant",
    "marginal_kernel",
    "power_multiplier",
    "POSITIVE_REALS",
    "GENERAL_LINEAR",
]

POSITIVE_REALS = "positive_reals"
GENERAL_LINEAR = "general_linear"

GL_SINGULAR_DET = 1e-9


def _one(_):
    return 1.0


@dataclass(frozen=True)
class OrbitalModel:
    """Maps and multipliers for one instance of the orbital framework.

    ``r`` must be G-equivariant, ``z`` defaults to ``g_action(g_inverse(r(x)), x)``.
    ``group`` selects how integrals over G are done: ``POSITIVE_REALS`` uses
    the invariant measure dg/g, ``GENERAL_LINEAR`` uses |det E|^{-k} dE with
    ``group_dim = k``.
    """

    label: str
    point_shape: tuple
    r: Callable
    s: Callable
    chi_H: Callable
    chi_G: Callable
    delta_G: Callable
    h_action: Callable
    h_inverse: Callable
    g_action: Callable
    g_inverse: Callable
    g_mul: Callable
    is_member: Callable
    h_identity: Any
    g_identity: Any
    group: str = POSITIVE_REALS
    group_dim: int = 1
    z_map: Optional[Callable] = None
    sampler: Optional[Callable] = None
    random_h: Optional[Callable] = None
    random_g: Optional[Callable] = None
    random_point: Optional[Callable] = None
    extra: dict = field(default_factory=dict, compare=False)

    def z(self, x):
        if self.z_map is not None:
            return self.z_map(x)
        return self.g_action(self.g_inverse(self.r(x)), x)

    def require_member(self, x, what="point"):
        if not self.is_member(x):
            raise ExcludedPointError(f"{what} lies outside the model's regular set X*")

    def sample(self, f, theta, count, rng):
        if self.sampler is None:
            raise NotImplementedError(f"model {self.label!r} has no sampler")
        return self.sampler(f, theta, count, rng)


@dataclass(frozen=True)
class DensityGenerator:
    """A nonnegative function on G.

    ``source`` carries the model-specific object the generator was built from
    (a radial or trace-form generator) so samplers can use exact recipes.
    """

    eval: Callable
    label: str
    source: Any = None

    def __call__(self, g):
        return self.eval(g)


@dataclass(frozen=True)
class ParamPoint:
    h: Any
    g: Any


@dataclass(frozen=True)
class GroupIntegral:
    value: float
    error: float
    method: str
    rejected: int = 0
    draws: int = 0


def power_multiplier(a: float) -> Callable:
    """The multiplier g -> g^a on R_{>0}; a = 0 is the invariant prior."""
    def m(g):
        return np.asarray(g, dtype=float) ** a

    m.exponent = a
    return m


def sampling_density(model: OrbitalModel, x, theta: ParamPoint, f: DensityGenerator):
    """p(x | h, g; f) = f(g^{-1} r(h^{-1}x) s(z(h^{-1}x))) / (chi_H(h) chi_G(g)).

    ``theta.g`` may be a batch of nuisance values; the result then has the
    batch shape.
    """
    y = model.h_action(model.h_inverse(theta.h), x)
    model.require_member(y, "h^{-1} x")
    rho = model.r(y)
    sig = model.s(model.z(y))
    arg = model.g_mul(model.g_inverse(theta.g), model.g_mul(rho, sig))
    return f.eval(arg) / (model.chi_H(theta.h) * model.chi_G(theta.g))


def cross_section_density(model: OrbitalModel, z, c: float) -> float:
    """Density of z(x) w.r.t. nu_Z at the identity coset: c / (chi_G(s(z)) Delta_G(s(z)))."""
    if not c > 0:
        raise DomainError("normalizing constant must be positive")
    sz = model.s(z)
    return c / (float(model.chi_G(sz)) * float(model.delta_G(sz)))


def normalizing_constant(
    model: OrbitalModel,
    f: DensityGenerator,
    spec: QuadratureSpec = QuadratureSpec(),
    rng: Optional[np.random.Generator] = None,
    draws: int = 200_000,
    batch: int = 50_000,
) -> GroupIntegral:
    """c = int_G f(g) chi_G(g) mu_G(dg).

    On R_{>0} (mu_G = dg/g) this is a one-dimensional quadrature.  On GL_k
    (mu_G = |det E|^{-k} dE) it is importance sampling with an i.i.d.
    standard normal proposal; draws with |det E| < 1e-9 are rejected and
    counted.
    """
    if model.group == POSITIVE_REALS:
        res = integrate_positive(
            lambda g: f.eval(g) * model.chi_G(g) / g, spec
        )
        return GroupIntegral(res.value, res.error, "quadrature")
    if model.group == GENERAL_LINEAR:
        if rng is None:
            raise DomainError("GL_k normalizing constant needs a seeded rng")
        k = model.group_dim

        def phi(E):
            return f.eval(E) * model.chi_G(E)

        return gl_importance_integral(phi, k, rng, draws, batch)
    raise DomainError(f"unknown group kind {model.group!r}")


def gl_importance_integral(phi: Callable, k: int, rng: np.random.Generator,
                           draws: int, batch: int = 50_000,
                           proposal: str = "normal") -> GroupIntegral:
    """Estimate int_{GL_k} phi(E) |det E|^{-k} dE by importance sampling.

    ``proposal`` is ``"normal"`` (i.i.d. N(0, 1) entries) or ``"cauchy"``
    (i.i.d. standard Cauchy entries); the latter has heavy enough tails for
    integrands that decay only polynomially.  ``phi`` receives a batch of
    matrices of shape (m, k, k).
    """
    if proposal not in ("normal", "cauchy"):
        raise DomainError(f"unknown proposal {proposal!r}")
    s1 = s2 = 0.0
    used = rejected = 0
    remaining = draws
    while remaining > 0:
        m = min(batch, remaining)
        remaining -= m
        if proposal == "normal":
            E = rng.standard_normal((m, k, k))
            logq = -0.5 * k * k * math.log(2 * math.pi) - 0.5 * np.einsum("mij,mij->m", E, E)
        else:
            E = rng.standard_cauchy((m, k, k))
            logq = -np.log(math.pi * (1.0 + E * E)).sum(axis=(1, 2))
        det = np.abs(np.linalg.det(E))
        keep = det >= GL_SINGULAR_DET
        rejected += int(m - keep.sum())
        w = np.zeros(m)
        w[keep] = np.asarray(phi(E[keep]), dtype=float) * det[keep] ** (-k) / np.exp(logq[keep])
        s1 += w.sum()
        s2 += (w * w).sum()
        used += m
    mean = s1 / used
    var = max(s2 / used - mean * mean, 0.0)
    return GroupIntegral(mean, math.sqrt(var / used), f"importance[{proposal}]", rejected, used)


def marginal_kernel(model: OrbitalModel, x, h, m: Callable = _one) -> float:
    """Closed-form kernel 1 / (chi_H(h) chi~(r(h^{-1}x)) chi~(s(z(h^{-1}x)))), chi~ = chi_G / m."""
    y = model.h_action(model.h_inverse(h), x)
    model.require_member(y, "h^{-1} x")
    rho = model.r(y)
    sig = model.s(model.z(y))

    def chi_tilde(g):
        return float(model.chi_G(g)) / float(m(g))

    return 1.0 / (float(model.chi_H(h)) * chi_tilde(rho) * chi_tilde(sig))
