"""Manufactured solution for verifying the cathode solver.

The ionic current is prescribed as ``j_ion = j_cell * (1 - z)**alpha`` on the
active layer, every other field follows from the transport relations, and an
extra volumetric source ``g`` is added to the charge balance so that these
closed forms solve the modified equations exactly.

Sign convention: with ``dj_ion/dy = -(i_ct + g)`` (the ionic current is
consumed across the layer) the source is

    g(z) = j_cell * alpha / delta_c * (1 - z)**(alpha - 1) - i_ct_exact(z)

so the augmented integrand ``i_ct + g`` equals the prescribed current density
derivative at the exact fields.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .core import (
    CONSTANTS,
    M_O2,
    CathodeError,
    CathodeGeometry,
    DeltaExceedsElectrodeError,
    DivergenceError,
    FieldSet,
    LimitingCurrentError,
    MaterialSet,
    MaxIterationsError,
    OperatingPoint,
    ValidationError,
    celsius_to_kelvin,
    partial_pressure_from_mass_fraction,
    validate,
)
from .electrochem import (
    activation_overpotential_modified,
    charge_transfer_current,
    concentration_overpotential,
    exchange_current_density,
)
from .solver import SolverSettings, interface_values, solve

DEFAULT_ALPHA = 8.0
DEFAULT_N_LIST = (20, 50, 100, 200)
ERROR_FIELDS = ("phi_el", "phi_ion", "j_el", "C_O2")
FLOOR_FACTOR = 1e-30
GAUSS_NODES = 64
KINK_SCAN_POINTS = 513


@dataclass(frozen=True)
class BenchmarkCase:
    alpha: float
    geometry: CathodeGeometry
    materials: MaterialSet
    operating: OperatingPoint
    delta_c_exact: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 1.0):
            raise ValidationError([("benchmark.alpha", f"must exceed 1, got {self.alpha!r}")])

    def with_delta(self, delta_c: float) -> "BenchmarkCase":
        return replace(self, delta_c_exact=delta_c)


def default_case(materials: MaterialSet, alpha=DEFAULT_ALPHA, thickness=5e-5, j_cell=1e5, V2=0.0,
                 T=celsius_to_kelvin(700.0), x_O2_bulk=0.21) -> BenchmarkCase:
    """Benchmark configuration: 50 um cathode at 700 C, 1e5 A/m^2, V2 = 0."""
    return BenchmarkCase(alpha, CathodeGeometry(0.0, thickness), materials,
                         OperatingPoint(T, j_cell, V2, x_O2_bulk))


def _require_delta(case: BenchmarkCase) -> float:
    if case.delta_c_exact is None:
        raise ValueError("delta_c_exact is not set; run benchmark_delta_c first")
    return case.delta_c_exact


def _closed_forms(case: BenchmarkCase, z, delta_c):
    geo, mat, op = case.geometry, case.materials, case.operating
    a, j = case.alpha, op.j_cell
    z = np.asarray(z, dtype=float)
    iv = interface_values(geo, mat, op, delta_c)
    s = 1.0 - z
    j_el = j * (1.0 - s**a)
    phi_ion = iv.phi_b + delta_c * j / (mat.sigma_ion * (1.0 + a)) * s ** (1.0 + a)
    phi_el = iv.V_b + delta_c * j / mat.sigma_el * (s - s ** (1.0 + a) / (1.0 + a))
    kappa = M_O2 / (4.0 * CONSTANTS.F * mat.rho_a * mat.D2)
    C_O2 = iv.C_O2_b - kappa * j * delta_c * s * (1.0 - s**a / (1.0 + a))
    if np.any(C_O2 <= 0.0):
        raise LimitingCurrentError("exact oxygen profile reaches zero for this benchmark configuration")
    return phi_el, phi_ion, C_O2, j_el


def _exact_kinetics(case: BenchmarkCase, phi_el, phi_ion, C_O2, overflow_cap):
    mat, op = case.materials, case.operating
    eta_conc = concentration_overpotential(C_O2, op.C_O2_bulk, op.T)
    eta_act = activation_overpotential_modified(phi_ion, phi_el, eta_conc)
    p = partial_pressure_from_mass_fraction(C_O2, mat.rho_a, op.T, M_O2)
    i0 = exchange_current_density(p, op.T, mat.exchange_model)
    i_ct = charge_transfer_current(eta_act, i0, mat.A_dpb, op.T, mat.exchange_model, overflow_cap)
    return eta_conc, eta_act, i_ct


def exact_fields(case: BenchmarkCase, z, overflow_cap=SolverSettings.overflow_cap,
                 delta_c: Optional[float] = None) -> FieldSet:
    """Closed-form fields at the nodes ``z``; ``Lambda`` holds the electron current."""
    delta_c = _require_delta(case) if delta_c is None else delta_c
    z = np.asarray(z, dtype=float)
    phi_el, phi_ion, C_O2, j_el = _closed_forms(case, z, delta_c)
    eta_conc, eta_act, i_ct = _exact_kinetics(case, phi_el, phi_ion, C_O2, overflow_cap)
    return FieldSet(z, phi_el, phi_ion, C_O2, np.atleast_1d(eta_act), np.atleast_1d(eta_conc),
                    np.atleast_1d(i_ct), j_el)


def exact_ion_current(case: BenchmarkCase, z):
    return case.operating.j_cell * (1.0 - np.asarray(z, dtype=float)) ** case.alpha


def exact_oxygen_flux(case: BenchmarkCase, z):
    j = case.operating.j_cell
    return -M_O2 * j / (4.0 * CONSTANTS.F) * (1.0 - (1.0 - np.asarray(z, dtype=float)) ** case.alpha)


def source_term_g(case: BenchmarkCase, z, overflow_cap=SolverSettings.overflow_cap):
    """Extra volumetric current (A/m^3) at rescaled coordinates ``z``."""
    delta_c = _require_delta(case)
    z = np.asarray(z, dtype=float)
    zz = np.atleast_1d(z)
    j = case.operating.j_cell
    drive = j * case.alpha / delta_c * (1.0 - zz) ** (case.alpha - 1.0)
    g = drive - exact_fields(case, zz, overflow_cap).i_ct
    return float(g[0]) if z.ndim == 0 else g


def source_term_g_y(case: BenchmarkCase, y, overflow_cap=SolverSettings.overflow_cap):
    """Same source expressed in the physical coordinate y in [h1, h1 + delta_c]."""
    delta_c = _require_delta(case)
    return source_term_g(case, (np.asarray(y, dtype=float) - case.geometry.h1) / delta_c, overflow_cap)


class SourceFunction:
    """Picklable z -> g(z) callable for the solver."""

    def __init__(self, case: BenchmarkCase, overflow_cap=SolverSettings.overflow_cap):
        self.case = case
        self.overflow_cap = overflow_cap

    def __call__(self, z):
        return source_term_g(self.case, z, self.overflow_cap)


def _signed_overpotential(case: BenchmarkCase, z, delta_c):
    phi_el, phi_ion, C_O2, _ = _closed_forms(case, z, delta_c)
    return phi_ion - phi_el - concentration_overpotential(C_O2, case.operating.C_O2_bulk, case.operating.T)


def _charge_transfer_integral(case: BenchmarkCase, delta_c, overflow_cap):
    # |eta| has a kink wherever the signed overpotential changes sign, so the
    # Gauss rule is applied piecewise between those roots.
    z = np.linspace(0.0, 1.0, KINK_SCAN_POINTS)
    raw = _signed_overpotential(case, z, delta_c)
    cuts = [0.0]
    for k in np.flatnonzero(raw[:-1] * raw[1:] < 0.0):
        cuts.append(optimize.brentq(lambda t: float(_signed_overpotential(case, t, delta_c)),
                                    z[k], z[k + 1], xtol=1e-15))
    cuts.append(1.0)
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        zz = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(weights @ exact_fields(case, zz, overflow_cap, delta_c).i_ct)
    return total


def benchmark_delta_c(case: BenchmarkCase, start: Optional[float] = None, tol=1e-12, max_iter=200,
                      overflow_cap=SolverSettings.overflow_cap) -> float:
    """Thickness consistent with the closed forms: delta = j_cell / int_0^1 i_ct(z) dz.

    The map delta -> j_cell / integral is steeply decreasing, so plain
    substitution oscillates. Instead the root of
    ``log(delta * integral) - log(j_cell)``, which increases with delta, is
    bracketed outwards from ``start`` (default: half the electrode) and
    polished with Brent's method. The integral uses Gauss-Legendre panels
    split at the kinks of |eta|, independent of the solver's splines.
    """
    validate(case.geometry, case.materials, case.operating)
    h = case.geometry.thickness
    j = case.operating.j_cell
    delta = 0.5 * h if start is None else start
    if not 0.0 < delta <= h:
        raise ValueError(f"start must lie in (0, {h}], got {start}")

    def mismatch(d):
        try:
            total = _charge_transfer_integral(case, d, overflow_cap)
        except DivergenceError:
            return math.inf
        return math.log(d * total / j) if total > 0.0 else -math.inf

    lo = hi = delta
    f_lo = f_hi = mismatch(delta)
    for _ in range(max_iter):
        if f_lo <= 0.0 <= f_hi:
            break
        if f_lo > 0.0:
            hi, f_hi = lo, f_lo
            lo = 0.5 * lo
            f_lo = mismatch(lo)
        else:
            if hi >= h:
                raise DeltaExceedsElectrodeError(
                    f"the benchmark needs an active layer thicker than the electrode ({h:.6g} m)")
            lo, f_lo = hi, f_hi
            hi = min(2.0 * hi, h)
            f_hi = mismatch(hi)
    else:
        raise MaxIterationsError(f"could not bracket the benchmark thickness in {max_iter} steps")
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    return optimize.brentq(mismatch, lo, hi, xtol=tol * lo, rtol=4.0 * np.finfo(float).eps,
                           maxiter=max_iter)


@dataclass(frozen=True)
class ErrorRow:
    N: int
    field: str
    max_rel_err: float
    mean_rel_err: float


@dataclass
class ErrorReport:
    case: BenchmarkCase
    rows: list = field(default_factory=list)
    floor_factor: float = FLOOR_FACTOR
    spline_bc: str = "natural"

    def by_field(self, name: str) -> list:
        return sorted((r for r in self.rows if r.field == name), key=lambda r: r.N)

    @property
    def N_values(self) -> list:
        return sorted({r.N for r in self.rows})

    @property
    def fields(self) -> list:
        seen = []
        for r in self.rows:
            if r.field not in seen:
                seen.append(r.field)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["N", "field", "max_rel_err", "mean_rel_err"])
        for r in sorted(self.rows, key=lambda r: (r.N, self.fields.index(r.field))):
            writer.writerow([r.N, r.field, repr(r.max_rel_err), repr(r.mean_rel_err)])
        return buf.getvalue()


def relative_errors(numeric, exact, floor_factor=FLOOR_FACTOR):
    """Pointwise |num - exact| / max(|exact|, floor), floor = floor_factor * max|exact|."""
    numeric = np.asarray(numeric, dtype=float)
    exact = np.asarray(exact, dtype=float)
    scale = float(np.max(np.abs(exact))) if exact.size else 0.0
    floor = floor_factor * scale if scale > 0.0 else floor_factor
    return np.abs(numeric - exact) / np.maximum(np.abs(exact), floor)


def _study_point(args):
    case, N, settings = args
    settings = replace(settings, N=N)
    solution = solve(case.geometry, case.materials, case.operating, settings,
                     source=SourceFunction(case, settings.overflow_cap))
    exact = exact_fields(case, solution.z, settings.overflow_cap)
    return N, solution, exact


def run_accuracy_study(case: BenchmarkCase, N_list: Sequence[int] = DEFAULT_N_LIST,
                       settings: SolverSettings = SolverSettings(), workers: int = 1,
                       floor_factor=FLOOR_FACTOR) -> ErrorReport:
    """Solve the source-augmented problem for each N and compare with the closed forms at the nodes."""
    if case.delta_c_exact is None:
        case = case.with_delta(benchmark_delta_c(case, overflow_cap=settings.overflow_cap))
    jobs = [(case, int(N), settings) for N in N_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_study_point, jobs))
    else:
        results = [_study_point(job) for job in jobs]

    report = ErrorReport(case, floor_factor=floor_factor, spline_bc=settings.spline_bc)
    for N, sol, exact in results:
        pairs = {
            "phi_el": (sol.fields.phi_el, exact.phi_el),
            "phi_ion": (sol.fields.phi_ion, exact.phi_ion),
            "j_el": (sol.fields.Lambda, exact.Lambda),
            "C_O2": (sol.fields.C_O2, exact.C_O2),
        }
        for name in ERROR_FIELDS:
            err = relative_errors(*pairs[name], floor_factor)
            report.rows.append(ErrorRow(N, name, float(err.max()), float(err.mean())))
        d_err = abs(sol.delta_c - case.delta_c_exact) / case.delta_c_exact
        report.rows.append(ErrorRow(N, "delta_c", float(d_err), float(d_err)))
    return report


__all__ = [
    "BenchmarkCase",
    "CathodeError",
    "ErrorReport",
    "ErrorRow",
    "SourceFunction",
    "benchmark_delta_c",
    "default_case",
    "exact_fields",
    "exact_ion_current",
    "exact_oxygen_flux",
    "relative_errors",
    "run_accuracy_study",
    "source_term_g",
    "source_term_g_y",
]
