"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class StructPopError(Exception):
    """Base class for all package errors."""


class EvaluationError(StructPopError):
    """A rate or test function returned a non-finite value."""


class DomainError(StructPopError, ValueError):
    """An argument lies outside the size domain of a grid."""


class InvalidRateError(StructPopError, ValueError):
    """Model rates violate a structural requirement (e.g. zero growth)."""


class ConfigError(StructPopError, ValueError):
    """A configuration document is malformed.

    The offending location is kept in ``path`` (dotted, e.g. ``tables.q.x``).
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NumericalError(StructPopError):
    """A numerical kernel (SVD, QR iteration, quadrature) failed."""


class SingularMatrixError(NumericalError):
    """LU factorisation hit a pivot below the singularity threshold."""

    def __init__(self, pivot: int, magnitude: float):
        super().__init__(f"matrix is singular to working tolerance at pivot {pivot} (|u_pp| = {magnitude:.3e})")
        self.pivot = pivot
        self.magnitude = magnitude


class NoSteadyStateError(StructPopError):
    """The renewal balance rules out a nontrivial stationary solution."""

    def __init__(self, value: float):
        super().__init__(f"renewal integral equals {value:.8g}, a steady state needs 1")
        self.value = value


class DegenerateNullspaceError(NumericalError):
    """The generator has a numerical nullspace of dimension greater than one."""

    def __init__(self, dim: int):
        super().__init__(f"nullspace has dimension {dim}; steady state is not unique")
        self.dim = dim


class StiffnessError(NumericalError):
    """Explicit time stepping collapsed; an implicit integrator is required."""
