"""Exception types shared across the package."""
from __future__ import annotations


class PathintError(Exception):
    """Base class for all package-specific errors."""


class NoRootError(PathintError):
    """No state root exists for the requested short-rate level.

    Attributes
    ----------
    min_attained : float or None
        Smallest attainable mapped rate over the searched bracket, when known.
    """

    def __init__(self, message: str, min_attained: float | None = None):
        super().__init__(message)
        self.min_attained = min_attained


class NonConvergenceError(PathintError):
    """Shooting iteration failed to reach the residual tolerance.

    Attributes
    ----------
    residual : float or None
        Last terminal residual seen before giving up.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class MultipleSolutionsError(PathintError):
    """The boundary-value problem admits several distinct classical paths.

    The caller decides how to combine them; all converged solutions are
    attached so nothing is silently discarded.

    Attributes
    ----------
    solutions : tuple
        Converged ClassicalSolution objects, one per distinct path.
    """

    def __init__(self, message: str, solutions=()):
        super().__init__(message)
        self.solutions = tuple(solutions)


class FocalPointError(PathintError):
    """The fluctuation solution phi crossed zero on (t, T].

    A zero of phi means the Gaussian fluctuation integral is undefined and
    the semiclassical prefactor has broken down.

    Attributes
    ----------
    s_cross : float or None
        Grid location of the first nonpositive phi sample.
    """

    def __init__(self, message: str, s_cross: float | None = None):
        super().__init__(message)
        self.s_cross = s_cross


class InstabilityError(PathintError):
    """A numerical scheme produced values outside its trusted range.

    Attributes
    ----------
    value : float or None
        The offending value.
    """

    def __init__(self, message: str, value: float | None = None):
        super().__init__(message)
        self.value = value
