"""
Errors - Exception hierarchy for wedge-intensity.

Every error derives from the builtin family a caller would already catch
(ValueError for bad inputs, ArithmeticError for numerical breakdown). Errors
with extra fields pickle with them, so they survive a process pool.
"""

from typing import Optional


class WedgeIntensityError(Exception):
    """Base class for all library errors."""


class DomainError(WedgeIntensityError, ValueError):
    """Argument outside the domain of an operation."""


class SingularCovarianceError(DomainError):
    """Correlation too close to +/-1 for the covariance factor to be inverted."""


class InvalidStateError(WedgeIntensityError, ValueError):
    """Inconsistent information state or numerically pathological wedge state."""


class QuadratureError(WedgeIntensityError, ArithmeticError):
    """Adaptive integration did not reach its tolerance."""

    def __init__(self, message: str, value: float, error: float):
        super().__init__(f"{message} (best estimate {value:.6g}, error estimate {error:.3g})")
        self.message = message
        self.value = value
        self.error = error

    def __reduce__(self):
        return type(self), (self.message, self.value, self.error)


class DegenerateConditioningError(WedgeIntensityError, ArithmeticError):
    """A conditioning probability is too small to divide by."""

    def __init__(self, operation: str, denominator: float, detail: Optional[str] = None):
        message = f"{operation}: conditioning denominator {denominator:.3g} below 1e-14"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.operation = operation
        self.denominator = denominator
        self.detail = detail

    def __reduce__(self):
        return type(self), (self.operation, self.denominator, self.detail)


class InsufficientSampleError(WedgeIntensityError, ValueError):
    """Monte Carlo conditioning set too small for a meaningful estimate."""

    def __init__(self, size: int, required: int = 1000):
        super().__init__(f"conditioning set has {size} paths, need at least {required}")
        self.size = size
        self.required = required

    def __reduce__(self):
        return type(self), (self.size, self.required)


class ConfigError(WedgeIntensityError, ValueError):
    """Scenario or configuration file could not be parsed or validated."""


class ValidationFailure(WedgeIntensityError):
    """Monte Carlo validation battery exceeded its false-alarm budget."""
