"""Exception types shared across the package."""

from __future__ import annotations


class MisclassitError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(MisclassitError):
    """Input data violates the CSV/dataset schema."""


class DomainError(MisclassitError):
    """Argument outside the mathematical domain of an operation."""


class IdentifiabilityError(MisclassitError):
    """Misclassification rates too close to theta1 + theta2 = 1.

    On that line the surrogate-response model carries no information
    about the regression coefficients, so score terms that divide by
    1 - theta1 - theta2 are refused.
    """


class DegenerateError(MisclassitError):
    """A plug-in quantity sits on the boundary of its valid range."""


class SingularJacobian(MisclassitError):
    """Newton Jacobian is numerically singular (condition estimate > 1e12).

    Carries the iterate at which the Jacobian became unusable.
    """

    def __init__(self, message: str, last_iterate=None, diagnostics=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.diagnostics = diagnostics


class SingularZdot(MisclassitError):
    """Plug-in score derivative matrix cannot be inverted reliably."""


class NonConvergence(MisclassitError):
    """Root finder exhausted its iteration budget.

    Carries the last iterate and diagnostics so callers can report a
    raw (non-converged) solution instead of losing it.
    """

    def __init__(self, message: str, last_iterate=None, diagnostics=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.diagnostics = diagnostics


class InsufficientSuccesses(MisclassitError):
    """Too many bootstrap replicates failed to produce usable estimates."""
