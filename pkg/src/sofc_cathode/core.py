"""Domain types, gas-mixture conversions and input validation.

Everything is SI: metres, kelvin, pascal, A/m^2. Temperatures quoted in
degrees Celsius are converted at the configuration boundary (see
``sofc_cathode.cli.config``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FARADAY = 96485.33  # C/mol
GAS_CONSTANT = 8.31446  # J/(mol K)

M_O2 = 0.032  # kg/mol
M_N2 = 0.028  # kg/mol

ATMOSPHERE = 101325.0  # Pa
CELSIUS_OFFSET = 273.15


@dataclass(frozen=True)
class PhysicalConstants:
    F: float = FARADAY
    R: float = GAS_CONSTANT


CONSTANTS = PhysicalConstants()


# --------------------------------------------------------------------------
# Errors
# --------------------------------------------------------------------------


class CathodeError(Exception):
    """Base class for every failure raised by the package."""


class ValidationError(CathodeError, ValueError):
    """Raised with the full list of violated constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{k}: {msg}" for k, msg in self.violations))


class LimitingCurrentError(CathodeError):
    """Oxygen is exhausted before (or inside) the catalyst layer."""


class DivergenceError(CathodeError):
    """Butler-Volmer exponent beyond the overflow cap."""


class MaxIterationsError(CathodeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DeltaExceedsElectrodeError(CathodeError):
    """The active layer would need to be thicker than the electrode."""


class NoCurrentError(CathodeError):
    """The charge-transfer integral vanished, so the layer thickness is undefined."""


# --------------------------------------------------------------------------
# Configuration records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CathodeGeometry:
    """Electrolyte interface ``h1`` and external boundary ``h2`` (m)."""

    h1: float
    h2: float

    @property
    def thickness(self) -> float:
        return self.h2 - self.h1


@dataclass(frozen=True)
class ExchangeCurrentModel:
    """i0 = prefactor * p_O2**pressure_exponent * exp(-activation_energy / (R T)).

    The symmetry factors multiply F*eta/(R T) in the forward and backward
    exponentials of the Butler-Volmer bracket.
    """

    prefactor: float
    pressure_exponent: float
    activation_energy: float
    forward_symmetry: float
    backward_symmetry: float

    @classmethod
    def lscf(cls) -> "ExchangeCurrentModel":
        return cls(1.47e6, 0.2, 85859.0, 1.2, 1.0)


@dataclass(frozen=True)
class MaterialSet:
    sigma_el: float  # S/m
    sigma_ion: float  # S/m
    rho_a: float  # kg/m^3
    D2: float  # m^2/s
    A_dpb: float  # m^2/m^3
    exchange_model: ExchangeCurrentModel = field(default_factory=ExchangeCurrentModel.lscf)


@dataclass(frozen=True)
class OperatingPoint:
    T: float  # K
    j_cell: float  # A/m^2
    V2: float  # V
    x_O2_bulk: float = 0.21
    p_total: float = ATMOSPHERE

    @property
    def C_O2_bulk(self) -> float:
        return mass_fraction_from_volume_fraction(self.x_O2_bulk)


@dataclass(frozen=True)
class Mesh:
    """Uniform nodes on the rescaled catalyst layer, z = (y - h1) / delta_c."""

    N: int

    def __post_init__(self):
        if self.N < 8:
            raise ValidationError([("mesh.N", f"need at least 8 nodes, got {self.N}")])

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N)


@dataclass(frozen=True)
class FieldSet:
    """Nodal profiles over the catalyst layer (index 0 is the electrolyte side)."""

    z: np.ndarray
    phi_el: np.ndarray
    phi_ion: np.ndarray
    C_O2: np.ndarray
    eta_act: np.ndarray
    eta_conc: np.ndarray
    i_ct: np.ndarray
    Lambda: np.ndarray

    def __post_init__(self):
        n = len(self.z)
        for name in ("phi_el", "phi_ion", "C_O2", "eta_act", "eta_conc", "i_ct", "Lambda"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError(f"{name} has {len(arr)} nodes, mesh has {n}")


@dataclass(frozen=True)
class CathodeSolution:
    fields: FieldSet
    delta_c: Optional[float]
    V_b: float
    phi_b: float
    C_O2_b: float
    C_O2_bulk: float
    iterations: int
    final_residual: float
    geometry: CathodeGeometry
    operating: OperatingPoint
    materials: MaterialSet
    residual_history: tuple = ()
    relaxation_events: tuple = ()

    @property
    def z(self) -> np.ndarray:
        return self.fields.z

    @property
    def y(self) -> np.ndarray:
        if self.delta_c is None:
            return np.full_like(self.fields.z, np.nan)
        return self.geometry.h1 + self.delta_c * self.fields.z

    @property
    def j_cell(self) -> float:
        return self.operating.j_cell

    @property
    def j_el(self) -> np.ndarray:
        return self.fields.Lambda.copy()

    @property
    def j_ion(self) -> np.ndarray:
        return self.j_cell - self.fields.Lambda

    @property
    def J_O2(self) -> np.ndarray:
        return -M_O2 / (4.0 * FARADAY) * self.fields.Lambda


# --------------------------------------------------------------------------
# Conversions
# --------------------------------------------------------------------------


def mass_fraction_from_volume_fraction(x_O2, M_O2=M_O2, M_N2=M_N2):
    """Oxygen mass fraction of a binary O2/N2 mixture with mole fraction ``x_O2``."""
    x = np.asarray(x_O2, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"mole fraction must lie in [0, 1], got {x_O2}")
    out = x * M_O2 / (x * M_O2 + (1.0 - x) * M_N2)
    return float(out) if out.ndim == 0 else out


def volume_fraction_from_mass_fraction(C_O2, M_O2=M_O2, M_N2=M_N2):
    C = np.asarray(C_O2, dtype=float)
    if np.any(C < 0.0) or np.any(C > 1.0):
        raise ValueError(f"mass fraction must lie in [0, 1], got {C_O2}")
    out = (C / M_O2) / (C / M_O2 + (1.0 - C) / M_N2)
    return float(out) if out.ndim == 0 else out


def partial_pressure_from_mass_fraction(C_j, rho, T, M_j=M_O2):
    """Ideal-gas partial pressure p_j = C_j * rho * R * T / M_j (Pa)."""
    if rho <= 0.0 or T <= 0.0:
        raise ValueError(f"rho and T must be positive, got rho={rho}, T={T}")
    C = np.asarray(C_j, dtype=float)
    if np.any(C < 0.0):
        raise ValueError("mass fraction must be non-negative")
    out = C * rho * GAS_CONSTANT * T / M_j
    return float(out) if out.ndim == 0 else out


def air_density(T, p_total=ATMOSPHERE, x_O2=0.21):
    """Ideal-gas density of an O2/N2 mixture. Opt-in helper; rho_a is normally an input."""
    M_mix = x_O2 * M_O2 + (1.0 - x_O2) * M_N2
    return p_total * M_mix / (GAS_CONSTANT * T)


def celsius_to_kelvin(t):
    return t + CELSIUS_OFFSET


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


def _positive(violations, key, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0.0):
        violations.append((key, f"must be a finite positive number, got {value!r}"))


def validate(geometry: CathodeGeometry, materials: MaterialSet, operating: OperatingPoint):
    """Check every constraint and raise one ``ValidationError`` listing all violations.

    Returns the inputs unchanged when they are valid; nothing is clamped.
    """
    violations = []
    if not (math.isfinite(geometry.h1) and math.isfinite(geometry.h2)):
        violations.append(("geometry.h1/h2", "coordinates must be finite"))
    elif geometry.h2 <= geometry.h1:
        violations.append(
            ("geometry.thickness", f"h2 must exceed h1 (h1={geometry.h1}, h2={geometry.h2})")
        )

    for name in ("sigma_el", "sigma_ion", "rho_a", "D2", "A_dpb"):
        _positive(violations, f"materials.{name}", getattr(materials, name))

    model = materials.exchange_model
    _positive(violations, "materials.exchange_model.prefactor", model.prefactor)
    _positive(violations, "materials.exchange_model.forward_symmetry", model.forward_symmetry)
    _positive(violations, "materials.exchange_model.backward_symmetry", model.backward_symmetry)
    if not model.activation_energy >= 0.0:
        violations.append(("materials.exchange_model.activation_energy", "must be >= 0"))
    if not math.isfinite(model.pressure_exponent):
        violations.append(("materials.exchange_model.pressure_exponent", "must be finite"))

    _positive(violations, "operating.T", operating.T)
    _positive(violations, "operating.p_total", operating.p_total)
    if not (math.isfinite(operating.j_cell) and operating.j_cell >= 0.0):
        violations.append(("operating.j_cell", f"must be >= 0, got {operating.j_cell!r}"))
    if not (0.0 < operating.x_O2_bulk < 1.0):
        violations.append(("operating.x_O2_bulk", f"must lie in (0, 1), got {operating.x_O2_bulk!r}"))
    if not math.isfinite(operating.V2):
        violations.append(("operating.V2", "must be finite"))

    if violations:
        raise ValidationError(violations)
    return geometry, materials, operating
