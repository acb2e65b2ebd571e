"""Exception hierarchy shared by every module."""


class OrbitError(Exception):
    """Base class for all package errors."""


class DomainError(OrbitError, ValueError):
    """An argument lies outside the domain of the requested function."""


class NotPositiveDefiniteError(DomainError):
    pass


class NonConvergenceError(OrbitError, ArithmeticError):
    """Adaptive quadrature ran out of subdivisions before meeting tolerance."""


class DivergenceError(OrbitError, ArithmeticError):
    """Partial integrals keep growing as the integration domain expands."""


class ExcludedPointError(DomainError):
    """The point lies in the null set removed from the sample space."""


class RankDeficientError(DomainError):
    pass


class SingularConfigurationError(ExcludedPointError):
    """The leading k x k block of a Helmert-reduced figure is singular."""


class NonDifferentiableError(DomainError):
    """One-sided finite differences disagree: the boundary has a kink here."""


class SamplerStallError(OrbitError, RuntimeError):
    """Rejection sampler acceptance rate fell below the configured floor."""


class EnvelopeError(OrbitError, RuntimeError):
    """A rejection ratio exceeded one, so the envelope was invalid."""


class InvarianceViolationError(OrbitError, AssertionError):
    """A statistic registered as invariant changed under a group action."""


class IntegrabilityError(OrbitError, ArithmeticError):
    """The integrability hypothesis for the nuisance integral failed."""


class ConfigError(OrbitError, ValueError):
    """Invalid experiment configuration."""


class GridPointError(ExcludedPointError):
    """A grid point lies outside the regular set; ``index`` names it."""

    def __init__(self, index: int, message: str):
        super().__init__(f"grid point {index}: {message}")
        self.index = index
