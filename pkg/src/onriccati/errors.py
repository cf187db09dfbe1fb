"""
Exception hierarchy for onriccati.
"""

from typing import Optional


class OnriccatiError(Exception):
    """Base class for every error raised by onriccati."""


class InvalidInputError(OnriccatiError, ValueError):
    """A matrix or scalar argument is not finite or otherwise malformed."""


class DimensionError(OnriccatiError, ValueError):
    """Matrix shapes are inconsistent with each other or with the operation."""


class NotPSDError(OnriccatiError):
    """A matrix expected to be positive semi-definite is indefinite."""


class InvalidCostError(OnriccatiError):
    """A cost matrix is not positive definite."""


class UnstableClosedLoopError(OnriccatiError):
    """A closed-loop matrix has spectral radius at or above one."""

    def __init__(self, message: str, radius: float):
        super().__init__(message)
        self.radius = radius


class NotStabilizableError(OnriccatiError):
    """No stabilizing gain was found for the pair (A, B)."""


class NoConvergenceError(OnriccatiError):
    """An iterative solver exhausted its iteration budget."""


class BoundViolationError(OnriccatiError):
    """A value matrix left the [mu I, nu I] band a certificate needs."""


class DegenerateBoundError(OnriccatiError):
    """A closed-form bound is undefined for the given arguments."""


class ResetDivergenceError(OnriccatiError):
    """The reset loop of the online update did not settle."""


class InvariantViolationError(OnriccatiError):
    """The online update produced a state its analysis rules out."""


class ConfigError(OnriccatiError):
    """A configuration file or flag is invalid."""


class GenerationError(OnriccatiError):
    """Random instance generation gave up."""


class ComparatorError(OnriccatiError):
    """No stable hindsight comparator could be formed."""


class MatrixFileError(OnriccatiError):
    """A matrix file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
