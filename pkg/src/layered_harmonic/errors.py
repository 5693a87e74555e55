"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HarmonicSpaceError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(HarmonicSpaceError, ValueError):
    """Invalid or inconsistent user configuration."""


class DomainError(HarmonicSpaceError, ValueError):
    """An argument lies outside the set on which an operation is defined."""


class NearBoundaryError(DomainError):
    """Evaluation requested too close to the boundary for the chosen backend."""


class UnsupportedOperationError(HarmonicSpaceError, NotImplementedError):
    """The backend does not provide the requested operation."""


class FitError(HarmonicSpaceError):
    """A least-squares fit is rank deficient."""

    def __init__(self, message: str, residual: float, condition: float):
        super().__init__(f"{message} (residual={residual:.3e}, condition={condition:.3e})")
        self.residual = residual
        self.condition = condition


class NonSPDError(HarmonicSpaceError):
    """A symmetric factorization broke down."""

    def __init__(self, message: str, pivot: int):
        super().__init__(f"{message} (failing pivot {pivot})")
        self.pivot = pivot


class EvaluationError(HarmonicSpaceError, ArithmeticError):
    """An integrand produced a non-finite value."""

    def __init__(self, message: str, location):
        super().__init__(f"{message} at {location}")
        self.location = location


class LayerFailure(HarmonicSpaceError):
    """Wraps any error raised while processing one layer of the recursion."""

    def __init__(self, layer: int, cause: BaseException):
        super().__init__(f"layer {layer} failed: {cause}")
        self.layer = layer
        self.cause = cause
