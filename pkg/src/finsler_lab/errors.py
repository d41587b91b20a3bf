"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FinslerLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(FinslerLabError, ValueError):
    """A point lies outside the disc on which the metric is defined, or an
    argument is outside the domain of an operation (e.g. a zero vector)."""


class ValidationError(FinslerLabError, ValueError):
    """Invalid configuration or metric parameters (e.g. loss of convexity)."""


class NumericalError(FinslerLabError, ArithmeticError):
    """An iterative solver failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        Largest residual over the failing lanes.
    last_iterate : object
        Last iterate of the solver (array or scalar), for post-mortem.
    """

    def __init__(self, message: str, residual: float = float("nan"), last_iterate=None):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = float(residual)
        self.last_iterate = last_iterate


class SolverError(NumericalError):
    """Shooting did not converge even after multi-start; usually the metric is
    not simple on the disc in question."""

    def __init__(self, message: str, residual: float = float("nan"), last_iterate=None, lanes=None):
        super().__init__(message, residual, last_iterate)
        self.lanes = lanes
