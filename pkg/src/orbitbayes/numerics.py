"""Special functions, adaptive quadrature and small dense linear algebra.

Everything here is a pure function of its arguments.  The quadrature routines
expect vectorised integrands (numpy array in, array of the same shape out) but
fall back to an element-wise loop for scalar-only callables.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import (
    DivergenceError,
    DomainError,
    NonConvergenceError,
    NotPositiveDefiniteError,
)

__all__ = [
    "QuadratureSpec",
    "QuadResult",
    "gamma",
    "log_gamma",
    "multivariate_gamma",
    "log_multivariate_gamma",
    "sphere_surface_area",
    "integrate_interval",
    "integrate_positive",
    "integrate_radial",
    "sphere_integral",
    "as_posdef",
    "cholesky_sqrt",
    "log_det_pd",
    "haar_orthogonal",
]

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy controls for the one-dimensional integrators."""

    rtol: float = 1e-8
    max_subdivisions: int = 2000
    log_substitution: bool = True

    def __post_init__(self):
        if not (0.0 < self.rtol <= 1e-2):
            raise DomainError(f"rtol must lie in (0, 1e-2], got {self.rtol!r}")
        if self.max_subdivisions < 8:
            raise DomainError("max_subdivisions must be >= 8")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    evaluations: int = 0

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# special functions


def gamma(a):
    """Euler gamma function (real argument)."""
    if np.any(np.isnan(a)):
        raise DomainError("gamma of NaN")
    return special.gamma(a)


def log_gamma(a):
    return special.gammaln(a)


def _check_mvgamma_args(k, a):
    if int(k) != k or k < 1:
        raise DomainError(f"dimension k must be a positive integer, got {k!r}")
    if math.isnan(a):
        raise DomainError("multivariate gamma of NaN")
    if a <= (k - 1) / 2:
        raise DomainError(
            f"multivariate gamma Gamma_{k}(a) diverges for a <= {(k - 1) / 2}; got a={a}"
        )


def multivariate_gamma(k: int, a: float) -> float:
    """Gamma_k(a) = pi^{k(k-1)/4} prod_{i=1..k} Gamma(a - (i-1)/2)."""
    _check_mvgamma_args(k, a)
    out = math.pi ** (k * (k - 1) / 4)
    for i in range(1, k + 1):
        out *= float(gamma(a - (i - 1) / 2))
    return out


def log_multivariate_gamma(k: int, a: float) -> float:
    _check_mvgamma_args(k, a)
    return k * (k - 1) / 4 * math.log(math.pi) + sum(
        float(log_gamma(a - (i - 1) / 2)) for i in range(1, k + 1)
    )


def sphere_surface_area(n: int) -> float:
    """Total surface measure of the unit sphere S^{n-1} in R^n."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return 2.0 * math.pi ** (n / 2) / float(gamma(n / 2))


# ---------------------------------------------------------------------------
# Gauss-Kronrod (7, 15) rule, QUADPACK qk15 abscissae and weights

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point layout on [-1, 1]
GK_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
GK_KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
GK_GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (x_gk[1], x_gk[3], ...)
for _j, _w in zip((1, 3, 5), _WG[:3]):
    GK_GAUSS_WEIGHTS[_j] = _w
    GK_GAUSS_WEIGHTS[14 - _j] = _w
GK_GAUSS_WEIGHTS[7] = _WG[3]

_EPS = np.finfo(float).eps


def _vectorized(fn: Callable) -> Callable:
    """Return a callable that maps arrays to arrays of the same shape."""

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        try:
            with np.errstate(all="ignore"):
                y = np.asarray(fn(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        flat = [float(fn(float(t))) for t in x.ravel()]
        return np.asarray(flat, dtype=float).reshape(x.shape)

    return wrapped


def _gk15_panels(fn, a: np.ndarray, b: np.ndarray):
    """Apply the 15-point rule to every panel [a_i, b_i] at once."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * GK_NODES[None, :]
    fx = fn(x)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)]
        if np.any(np.isinf(fx)):
            raise DivergenceError(f"integrand is infinite near x={bad.ravel()[0]!r}")
        raise NonConvergenceError(f"integrand is not finite near x={bad.ravel()[0]!r}")
    kron = (fx * GK_KRONROD_WEIGHTS).sum(axis=1)
    gauss = (fx * GK_GAUSS_WEIGHTS).sum(axis=1)
    mean = kron * 0.5
    resasc = (GK_KRONROD_WEIGHTS * np.abs(fx - mean[:, None])).sum(axis=1) * np.abs(half)
    resabs = (GK_KRONROD_WEIGHTS * np.abs(fx)).sum(axis=1) * np.abs(half)
    err = np.abs((kron - gauss) * half)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(
            (resasc != 0) & (err != 0),
            resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5),
            err,
        )
    floor = 50.0 * _EPS * resabs
    scaled = np.maximum(scaled, floor)
    return kron * half, scaled, resabs


def integrate_interval(
    fn: Callable,
    a: float,
    b: float,
    rtol: float = 1e-8,
    atol: float = 0.0,
    max_subdivisions: int = 2000,
    breakpoints: Sequence[float] = (),
) -> QuadResult:
    """Globally adaptive Gauss-Kronrod quadrature on a finite interval.

    Panels with the largest error estimates are bisected until the summed
    error is below ``max(atol, rtol * |I|)``.  ``max_subdivisions`` bounds
    the number of panels.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise DomainError("integrate_interval needs finite limits")
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    f = _vectorized(fn)
    edges = np.unique(np.concatenate([[a], [p for p in breakpoints if a < p < b], [b]]))
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    val, err, _ = _gk15_panels(f, lo, hi)
    nfev = 15 * len(lo)
    # heap of (-err, index) over live panels
    panels = list(zip(lo, hi, val, err))
    heap = [(-e, i) for i, (_, _, _, e) in enumerate(panels)]
    heapq.heapify(heap)
    total = float(np.sum(val))
    total_err = float(np.sum(err))
    while total_err > max(atol, rtol * abs(total)):
        if len(heap) >= max_subdivisions:
            raise NonConvergenceError(
                f"quadrature on [{a}, {b}] did not reach rtol={rtol} within "
                f"{max_subdivisions} panels (estimate {total!r}, error {total_err:.3g})"
            )
        # bisect a batch of the worst panels to amortise numpy overhead
        nsplit = max(1, min(len(heap) // 4, max_subdivisions - len(heap), 64))
        picked = [heapq.heappop(heap)[1] for _ in range(min(nsplit, len(heap)))]
        pl = np.array([panels[i][0] for i in picked])
        ph = np.array([panels[i][1] for i in picked])
        pm = 0.5 * (pl + ph)
        if np.any((pm <= pl) | (pm >= ph)):
            raise NonConvergenceError("panel width reached machine precision")
        nv, ne, _ = _gk15_panels(f, np.concatenate([pl, pm]), np.concatenate([pm, ph]))
        nfev += 15 * len(nv)
        m = len(picked)
        for j, i in enumerate(picked):
            _, _, v_old, e_old = panels[i]
            total -= v_old
            total_err -= e_old
            for lo_j, hi_j, v_new, e_new in (
                (pl[j], pm[j], nv[j], ne[j]),
                (pm[j], ph[j], nv[m + j], ne[m + j]),
            ):
                panels.append((lo_j, hi_j, v_new, e_new))
                heapq.heappush(heap, (-e_new, len(panels) - 1))
                total += v_new
                total_err += e_new
        # guard the running sums against cancellation drift
        live = [i for _, i in heap]
        total = float(sum(panels[i][2] for i in live))
        total_err = float(sum(panels[i][3] for i in live))
    return QuadResult(sign * total, total_err, nfev)


_WINDOW0 = 4.0
_WINDOW_MAX = 64.0


def integrate_positive(fn: Callable, spec: QuadratureSpec = QuadratureSpec()) -> QuadResult:
    """Integrate ``fn`` over (0, inf).

    With ``spec.log_substitution`` the integral becomes one over u = log r on
    the whole real line, evaluated on a window [-L, L] whose half-width
    doubles until the two new tail pieces are negligible.  Tail pieces that
    fail to shrink as the window grows signal a divergent integral.
    """
    f = _vectorized(fn)
    if not spec.log_substitution:
        def mapped(t):
            r = t / (1.0 - t)
            return f(r) / (1.0 - t) ** 2

        return integrate_interval(mapped, 0.0, 1.0, rtol=spec.rtol,
                                  max_subdivisions=spec.max_subdivisions)

    def in_log(u):
        r = np.exp(u)
        out = f(r) * r
        return np.where(np.isnan(out) & (r == np.inf), 0.0, out)

    piece_rtol = spec.rtol * 0.05
    core = integrate_interval(in_log, -_WINDOW0, _WINDOW0, rtol=piece_rtol,
                              max_subdivisions=spec.max_subdivisions)
    total, err, nfev = core.value, core.error, core.evaluations
    increments: list[float] = []
    L = _WINDOW0
    small_streak = 0
    while True:
        if L >= _WINDOW_MAX:
            break
        atol = piece_rtol * abs(total) if total != 0 else 0.0
        left = integrate_interval(in_log, -2 * L, -L, rtol=piece_rtol, atol=atol,
                                  max_subdivisions=spec.max_subdivisions)
        right = integrate_interval(in_log, L, 2 * L, rtol=piece_rtol, atol=atol,
                                   max_subdivisions=spec.max_subdivisions)
        inc = left.value + right.value
        total += inc
        err += left.error + right.error
        nfev += left.evaluations + right.evaluations
        increments.append(abs(inc))
        L *= 2
        if total != 0 and abs(inc) <= 0.1 * spec.rtol * abs(total):
            small_streak += 1
            if small_streak >= 2:
                return QuadResult(total, err, nfev)
        else:
            small_streak = 0
    if total == 0:
        return QuadResult(0.0, err, nfev)
    if len(increments) >= 2 and increments[-1] >= 0.5 * increments[-2] and increments[-1] > 0:
        raise DivergenceError(
            f"tail contributions do not decay as the domain expands "
            f"(last increments {increments[-2]:.3g}, {increments[-1]:.3g}); "
            f"partial integral {total:.6g}"
        )
    if increments and increments[-1] <= spec.rtol * abs(total):
        return QuadResult(total, err + increments[-1], nfev)
    raise NonConvergenceError(
        f"tail of the integral over (0, inf) not resolved; partial value {total:.6g}"
    )


def integrate_radial(g: Callable, n: float, spec: QuadratureSpec = QuadratureSpec()) -> QuadResult:
    """Return int_0^inf g(r) r^(n-1) dr."""
    gv = _vectorized(g)

    def integrand(r):
        gr = gv(r)
        with np.errstate(over="ignore", invalid="ignore"):
            out = gr * r ** (n - 1)
        return np.where(gr == 0, 0.0, out)

    return integrate_positive(integrand, spec)


def sphere_integral(fn: Callable, n: int, spec: QuadratureSpec = QuadratureSpec()) -> QuadResult:
    """Integrate ``fn(u)`` (u an array of shape (..., n)) over S^{n-1}.

    Product-angle quadrature for n in {2, 3}.  Panel breakpoints are placed on
    the coordinate planes, where l_q-type integrands have kinks.
    """
    if n == 1:
        vals = np.asarray(fn(np.array([[1.0], [-1.0]])), dtype=float)
        return QuadResult(float(vals.sum()), 0.0, 2)
    quarter = [k * math.pi / 2 for k in range(1, 4)]
    if n == 2:
        def circle(theta):
            u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            return np.asarray(fn(u), dtype=float)

        return integrate_interval(circle, 0.0, 2 * math.pi, rtol=spec.rtol,
                                  max_subdivisions=spec.max_subdivisions,
                                  breakpoints=quarter)
    if n == 3:
        inner_rtol = spec.rtol * 0.1

        def ring(t):
            out = np.empty_like(t)
            for idx, tv in np.ndenumerate(t):
                rho = math.sqrt(max(0.0, 1.0 - tv * tv))

                def around(phi, tv=tv, rho=rho):
                    u = np.stack([rho * np.cos(phi), rho * np.sin(phi),
                                  np.full_like(phi, tv)], axis=-1)
                    return np.asarray(fn(u), dtype=float)

                out[idx] = integrate_interval(
                    around, 0.0, 2 * math.pi, rtol=inner_rtol,
                    max_subdivisions=spec.max_subdivisions, breakpoints=quarter,
                ).value
            return out

        return integrate_interval(ring, -1.0, 1.0, rtol=spec.rtol,
                                  max_subdivisions=spec.max_subdivisions,
                                  breakpoints=(0.0,))
    raise DomainError(f"product-angle sphere quadrature is implemented for n <= 3, got {n}")


# ---------------------------------------------------------------------------
# dense linear algebra


def as_posdef(S) -> np.ndarray:
    """Validate a symmetric positive definite matrix; returns its symmetrised copy."""
    S = np.array(S, dtype=float)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise DomainError("matrix has non-finite entries")
    if np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_TOL:
        raise DomainError("matrix is not symmetric within 1e-12")
    S = 0.5 * (S + S.T)
    cholesky_sqrt(S)
    return S


def cholesky_sqrt(S) -> np.ndarray:
    """Lower-triangular T with positive diagonal such that S = T T^T."""
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    k = A.shape[0]
    T = np.zeros_like(A)
    for j in range(k):
        pivot = A[j, j] - T[j, :j] @ T[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(
                f"non-positive pivot {pivot:.3g} at column {j}"
            )
        T[j, j] = math.sqrt(pivot)
        if j + 1 < k:
            T[j + 1:, j] = (A[j + 1:, j] - T[j + 1:, :j] @ T[j, :j]) / T[j, j]
    return T


def log_det_pd(S) -> float:
    T = cholesky_sqrt(S)
    return 2.0 * float(np.sum(np.log(np.diag(T))))


def haar_orthogonal(k: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the Haar measure on O_k.

    QR of a Gaussian matrix, with the columns of Q multiplied by the signs of
    diag(R) so that the factorisation is unique.
    """
    shape = (k, k) if size is None else (size, k, k)
    A = rng.standard_normal(shape)
    Q, R = np.linalg.qr(A)
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    d = np.where(d == 0, 1.0, d)
    return Q * d[..., None, :]
