"""
Error hierarchy for finsler-lab.
"""

from typing import Optional


class FinslerLabError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(FinslerLabError, ValueError):
    """Operands live in different dimensions or degrees."""


class DegenerateKVectorError(FinslerLabError, ValueError):
    """A k-vector (or frame) is zero up to tolerance."""


class InvalidNormError(FinslerLabError, ValueError):
    """Norm data violate positivity or quadratic convexity."""


class ImmersionError(FinslerLabError, ValueError):
    """A patch fails to be an immersion on its quadrature grid."""


class ConvergenceError(FinslerLabError):
    """
    An iterative solve stopped without meeting its tolerance.

    Attributes:
        best_value: Best objective value reached
        residual: Residual at the best iterate
    """

    def __init__(self, message: str, best_value: float, residual: float):
        super().__init__(f"{message} (best value {best_value:.12g}, residual {residual:.3e})")
        self.best_value = best_value
        self.residual = residual


class CubatureError(FinslerLabError):
    """
    A cubature did not reach its tolerance under grid refinement.

    Attributes:
        value: Value on the finest grid
        error_estimate: Richardson (half-grid) error estimate
    """

    def __init__(self, message: str, value: float, error_estimate: float):
        super().__init__(f"{message} (value {value:.12g}, error estimate {error_estimate:.3e})")
        self.value = value
        self.error_estimate = error_estimate


class GeodesicSolveError(FinslerLabError):
    """The fundamental tensor could not be inverted along a trajectory."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


class ConfigValidationError(FinslerLabError, ValueError):
    """An experiment config or descriptor does not match its schema."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class UnknownOptionError(ConfigValidationError):
    """A method, route, profile or density kind is not one of the supported names."""


class DomainError(FinslerLabError, ValueError):
    """A variation support or a sampling box does not fit the domain it needs."""
