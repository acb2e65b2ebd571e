"""Trace-form generators f~(W) = h(tr W) for matrix-variate models.

If U is n x k with density h(tr U^T U), then vec(U) is spherical in R^{nk}
with radial profile h(rho^2), so the v-spherical radial samplers apply.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .numerics import QuadratureSpec, integrate_radial, sphere_surface_area
from .vspherical import RadialGenerator, exp_power, gaussian, student


@dataclass(frozen=True)
class TraceGenerator:
    """h on [0, inf), normalised so that h(tr U^T U) is a density on R^{dim}."""

    h: Callable
    label: str
    dim: int
    radial: RadialGenerator

    def __call__(self, t):
        return self.h(np.asarray(t, dtype=float))

    def of_matrix(self, W):
        """f~(W) = h(tr W) for a (batch of) square matrices."""
        return self.h(np.trace(np.asarray(W, dtype=float), axis1=-2, axis2=-1))

    def sample_unit(self, count: int, shape: tuple, rng: np.random.Generator) -> np.ndarray:
        """Draw U of the given shape with density h(tr U^T U)."""
        N = int(np.prod(shape))
        if N != self.dim:
            raise DomainError(f"generator lives in dimension {self.dim}, not {N}")
        g = rng.standard_normal((count, N))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        rho = self.radial.sample_radius(rng, count)
        return (g / norms * rho[:, None]).reshape((count, *shape))


def _normalised(raw_h: Callable, N: int) -> Callable:
    spec = QuadratureSpec(rtol=1e-11)
    mass = integrate_radial(lambda r: raw_h(np.square(r)), N, spec).value
    scale = 1.0 / (sphere_surface_area(N) * mass)
    return lambda t: scale * raw_h(t)


def gaussian_trace(N: int) -> TraceGenerator:
    """h(t) = (2 pi)^{-N/2} exp(-t/2)."""
    const = (2 * math.pi) ** (-N / 2)
    return TraceGenerator(lambda t: const * np.exp(-0.5 * np.asarray(t, dtype=float)),
                          "gaussian", N, gaussian(N))


def exp_power_trace(q: float, N: int) -> TraceGenerator:
    """h(t) proportional to exp(-t^{q/2} / q)."""
    raw = lambda t: np.exp(-np.power(np.asarray(t, dtype=float), q / 2) / q)  # noqa: E731
    return TraceGenerator(_normalised(raw, N), f"exp-power(q={q:g})", N, exp_power(q, N))


def student_trace(d: float, N: int) -> TraceGenerator:
    """h(t) proportional to (1 + t/d)^{-(N+d)/2}."""
    raw = lambda t: np.power(1.0 + np.asarray(t, dtype=float) / d, -(N + d) / 2)  # noqa: E731
    return TraceGenerator(_normalised(raw, N), f"student(d={d:g})", N, student(d, N))


BUILTIN_TRACE_GENERATORS = {
    "gaussian": gaussian_trace,
    "exp-power-1": lambda N: exp_power_trace(1.0, N),
    "exp-power-4": lambda N: exp_power_trace(4.0, N),
    "student-3": lambda N: student_trace(3.0, N),
}


def builtin_trace_generator(label: str, N: int) -> TraceGenerator:
    try:
        return BUILTIN_TRACE_GENERATORS[label](N)
    except KeyError:
        raise DomainError(
            f"unknown trace generator {label!r}; choose from {sorted(BUILTIN_TRACE_GENERATORS)}"
        ) from None
