"""Galerkin discretisation, steady states and stability of size-structured population models."""

from .errors import (
    ConfigError,
    DegenerateNullspaceError,
    DomainError,
    EvaluationError,
    InvalidRateError,
    NoSteadyStateError,
    NumericalError,
    SingularMatrixError,
    StiffnessError,
    StructPopError,
)
from .grid import Grid, GridVector, embed, moments, project, sup_error
from .model import ParamPoint, PBERates, SinkoRates, pbe_canonical, rates_from_config, sinko_canonical
from .solve import SteadyState, Trajectory, find_steady_state, integrate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateNullspaceError",
    "DomainError",
    "EvaluationError",
    "Grid",
    "GridVector",
    "InvalidRateError",
    "NoSteadyStateError",
    "NumericalError",
    "ParamPoint",
    "PBERates",
    "SingularMatrixError",
    "SinkoRates",
    "SteadyState",
    "StiffnessError",
    "StructPopError",
    "Trajectory",
    "embed",
    "find_steady_state",
    "integrate",
    "moments",
    "pbe_canonical",
    "project",
    "rates_from_config",
    "sinko_canonical",
    "sup_error",
]
