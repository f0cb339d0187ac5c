"""Isothermal 1D SOFC cathode model with the active-layer thickness as an unknown."""
from .core import (
    CathodeError,
    CathodeGeometry,
    CathodeSolution,
    DeltaExceedsElectrodeError,
    DivergenceError,
    ExchangeCurrentModel,
    FieldSet,
    LimitingCurrentError,
    MaterialSet,
    MaxIterationsError,
    NoCurrentError,
    OperatingPoint,
    ValidationError,
    validate,
)
from .solver import SolverSettings, solve, solve_fixed_delta

__version__ = "0.1.0"

__all__ = [
    "CathodeError",
    "CathodeGeometry",
    "CathodeSolution",
    "DeltaExceedsElectrodeError",
    "DivergenceError",
    "ExchangeCurrentModel",
    "FieldSet",
    "LimitingCurrentError",
    "MaterialSet",
    "MaxIterationsError",
    "NoCurrentError",
    "OperatingPoint",
    "ValidationError",
    "SolverSettings",
    "solve",
    "solve_fixed_delta",
    "validate",
]
