"""Group-invariant sampling models and their Bayesian marginal kernels.

Submodules
----------
numerics
    Quadrature, special functions and small dense linear algebra.
core
    Generic orbital model: densities, group integrals, marginal kernels.
vspherical
    v-spherical (star-shaped) location-scale family.
affine
    Matrix location-scale model and the affine shape (configuration) density.
pca
    Principal-component model with orthogonal nuisance.
analysis
    Null-robustness tests, marginal-equivalence checks, propriety checks.
cli
    Command-line front end.
"""
from .core import DensityGenerator, OrbitalModel, ParamPoint, marginal_kernel, sampling_density
from .energy import EnergyTestResult, energy_test
from .errors import (
    ConfigError, DivergenceError, DomainError, IntegrabilityError, InvarianceViolationError,
    NonConvergenceError, OrbitError,
)

__version__ = "0.1.0"

__all__ = [
    "DensityGenerator", "OrbitalModel", "ParamPoint", "marginal_kernel", "sampling_density",
    "EnergyTestResult", "energy_test", "ConfigError", "DivergenceError", "DomainError",
    "IntegrabilityError", "InvarianceViolationError", "NonConvergenceError", "OrbitError",
]
