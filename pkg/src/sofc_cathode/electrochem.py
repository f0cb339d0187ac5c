"""Pointwise cathode kinetics.

All functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CONSTANTS,
    M_O2,
    DivergenceError,
    ExchangeCurrentModel,
    MaterialSet,
    OperatingPoint,
    PhysicalConstants,
    mass_fraction_from_volume_fraction,
)

DEFAULT_OVERFLOW_CAP = 500.0


@dataclass(frozen=True)
class KineticsContext:
    constants: PhysicalConstants
    materials: MaterialSet
    operating: OperatingPoint
    C_O2_bulk: float

    @classmethod
    def build(cls, materials, operating, C_O2_bulk=None, constants=CONSTANTS):
        if C_O2_bulk is None:
            C_O2_bulk = mass_fraction_from_volume_fraction(operating.x_O2_bulk)
        return cls(constants, materials, operating, C_O2_bulk)

    @property
    def T(self):
        return self.operating.T

    @property
    def thermal_voltage(self):
        """R*T/F in volts."""
        return self.constants.R * self.operating.T / self.constants.F


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def exchange_current_density(p_O2, T, model: ExchangeCurrentModel, R=CONSTANTS.R):
    p = np.asarray(p_O2, dtype=float)
    if np.any(p < 0.0):
        raise ValueError("oxygen partial pressure must be non-negative")
    return _out(model.prefactor * p**model.pressure_exponent * np.exp(-model.activation_energy / (R * T)))


def concentration_overpotential(C_O2, C_O2_bulk, T, constants=CONSTANTS):
    """(R T / 4F) ln(C_bulk / C). Negative values are allowed in trial iterates."""
    C = np.asarray(C_O2, dtype=float)
    if np.any(C <= 0.0) or C_O2_bulk <= 0.0:
        raise ValueError("oxygen mass fraction must be positive (oxygen depleted)")
    return _out(constants.R * T / (4.0 * constants.F) * np.log(C_O2_bulk / C))


def activation_overpotential_modified(phi_ion, phi_el, eta_conc):
    return _out(np.abs(np.asarray(phi_ion) - np.asarray(phi_el) - np.asarray(eta_conc)))


def butler_volmer_bracket(eta_act, T, model: ExchangeCurrentModel, overflow_cap=DEFAULT_OVERFLOW_CAP,
                          constants=CONSTANTS):
    f = constants.F / (constants.R * T)
    eta = np.asarray(eta_act, dtype=float)
    forward = model.forward_symmetry * f * eta
    peak = np.max(forward) if forward.size else 0.0
    if not np.isfinite(peak) or peak > overflow_cap:
        raise DivergenceError(
            f"Butler-Volmer forward exponent {peak:.4g} exceeds cap {overflow_cap:g}"
        )
    return np.exp(forward) - np.exp(-model.backward_symmetry * f * eta)


def charge_transfer_current(eta_act, i0, A_dpb, T, model: ExchangeCurrentModel,
                            overflow_cap=DEFAULT_OVERFLOW_CAP, constants=CONSTANTS):
    """Volumetric charge-transfer current i0 * A * [exp(a F eta/RT) - exp(-b F eta/RT)] (A/m^3)."""
    bracket = butler_volmer_bracket(eta_act, T, model, overflow_cap, constants)
    return _out(np.asarray(i0) * A_dpb * bracket)


def psi_profile(C_O2_reduced, eta_act, context: KineticsContext, overflow_cap=DEFAULT_OVERFLOW_CAP):
    """Charge-transfer current with the bulk factor pulled out: i_ct = C_bulk**beta * psi.

    ``C_O2_reduced`` is C_O2 / C_O2_bulk.
    """
    mat = context.materials
    model = mat.exchange_model
    T = context.T
    R = context.constants.R
    C_red = np.asarray(C_O2_reduced, dtype=float)
    if np.any(C_red <= 0.0):
        raise ValueError("reduced oxygen mass fraction must be positive")
    p_reduced = C_red * mat.rho_a * R * T / M_O2
    i0_reduced = exchange_current_density(p_reduced, T, model, R)
    return charge_transfer_current(eta_act, i0_reduced, mat.A_dpb, T, model, overflow_cap, context.constants)
