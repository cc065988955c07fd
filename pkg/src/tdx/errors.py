"""Exception hierarchy.

Validation problems derive from :class:`ValueError` and numerical failures
from :class:`ArithmeticError`, so callers that only care about the broad
category can catch the builtin.
"""


class TdxError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TdxError, ValueError):
    """Invalid argument, shape, or configuration."""


class DomainError(ValidationError):
    """Input outside the mathematical domain of an operation."""


class InsufficientDataError(ValidationError):
    """Too few observations to carry out an estimate."""


class ScenarioError(ValidationError):
    """A drift scenario definition is malformed."""


class NumericalError(TdxError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class NumericalOverflowError(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class LineSearchError(NumericalError):
    """No finite step could be found along the search direction."""


class FitError(NumericalError):
    """Every start of a multistart fit failed."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class SelectionError(NumericalError):
    """Every cell of a hyperparameter grid failed to fit."""
