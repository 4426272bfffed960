"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class LoglabError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(LoglabError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConfigurationError(LoglabError, ValueError):
    """Inconsistent or invalid configuration."""


class PreconditionError(LoglabError):
    """A documented precondition of an operation does not hold."""


class RejectionError(PreconditionError):
    """An input was rejected because a hypothesis of a construction fails."""


class InsufficientDataError(LoglabError, ValueError):
    """Too few usable samples for a fit."""


class NumericalError(LoglabError, ArithmeticError):
    """Non-finite values appeared during an iterative computation.

    Parameters
    ----------
    message : str
        Human-readable description.
    iteration : int, optional
        Iteration index at which the failure was detected.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"{message} (iteration {iteration})")
        self.iteration = iteration
