"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DegeneracyError(ArithmeticError):
    """A tracked level is (numerically) degenerate with another level."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None, gap: float | None = None):
        super().__init__(message)
        self.pair = pair
        self.gap = gap


class GaugeError(ArithmeticError):
    """The active phase convention is inconsistent at the requested point."""


class PathTooCoarseError(ArithmeticError):
    """Consecutive eigenvectors along a path overlap too weakly to transport."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class InertiaError(ArithmeticError):
    """Total inertia is singular or indefinite."""


class DomainError(ValueError):
    """A trajectory left the region covered by a field interpolator."""
