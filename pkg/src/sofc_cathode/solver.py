"""Integral-equation fixed-point solver for the cathode active layer.

All catalyst-layer fields live on the fixed grid z in [0, 1] with
y = h1 + delta_c * z, so the mesh never moves while delta_c is iterated.
The backing zone [h_b, h2] is solved in closed form.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Optional

import numpy as np

from .core import (
    CONSTANTS,
    M_O2,
    CathodeError,
    CathodeGeometry,
    CathodeSolution,
    DeltaExceedsElectrodeError,
    DivergenceError,
    FieldSet,
    LimitingCurrentError,
    MaterialSet,
    MaxIterationsError,
    Mesh,
    NoCurrentError,
    OperatingPoint,
    ValidationError,
    partial_pressure_from_mass_fraction,
    validate,
)
from .electrochem import (
    DEFAULT_OVERFLOW_CAP,
    KineticsContext,
    activation_overpotential_modified,
    charge_transfer_current,
    concentration_overpotential,
    exchange_current_density,
    psi_profile,
)
from .quadrature import NATURAL, build_spline, cumulative_integral, tail_integrals

log = logging.getLogger(__name__)

SourceTerm = Callable[[np.ndarray], np.ndarray]

INITIAL_EXPONENT = 10.0


@dataclass(frozen=True)
class SolverSettings:
    """Fixed-point controls.

    ``relaxation`` blends each new iterate with the previous one. When a
    trial iterate is infeasible, or (after ``warmup`` iterations) the residual
    climbs above ``growth`` times the best value seen since the last
    back-off, or the best residual has not improved for ``stall`` iterations
    (a bounded oscillation), the factor is halved (down to ``min_relaxation``) and the event is
    recorded in the solution.
    """

    N: int = 100
    tol: float = 1e-10
    max_iter: int = 5000
    relaxation: float = 0.5
    min_relaxation: float = 1.0 / 64.0
    growth: float = 10.0
    warmup: int = 25
    stall: int = 40
    overflow_cap: float = DEFAULT_OVERFLOW_CAP
    spline_bc: str = NATURAL

    def __post_init__(self):
        violations = []
        if self.N < 8:
            violations.append(("solver.N", f"need at least 8 nodes, got {self.N}"))
        if not 0.0 < self.tol < 1.0:
            violations.append(("solver.tol", f"must lie in (0, 1), got {self.tol}"))
        if not 0.0 < self.relaxation <= 1.0:
            violations.append(("solver.relaxation", f"must lie in (0, 1], got {self.relaxation}"))
        if not 0.0 < self.min_relaxation <= self.relaxation:
            violations.append(("solver.min_relaxation", "must lie in (0, relaxation]"))
        if self.stall < 1:
            violations.append(("solver.stall", "must be >= 1"))
        if self.warmup < 0:
            violations.append(("solver.warmup", "must be >= 0"))
        if not self.growth > 1.0:
            violations.append(("solver.growth", f"must exceed 1, got {self.growth}"))
        if self.max_iter < 1:
            violations.append(("solver.max_iter", "must be >= 1"))
        if violations:
            raise ValidationError(violations)


@dataclass(frozen=True)
class InterfaceValues:
    V_b: float
    C_O2_b: float
    phi_b: float


def _o2_transport_factor(materials: MaterialSet) -> float:
    """M_O2 / (4 F rho_a D2): converts an electron current into a mass-fraction gradient."""
    return M_O2 / (4.0 * CONSTANTS.F * materials.rho_a * materials.D2)


def interface_values(geometry: CathodeGeometry, materials: MaterialSet, operating: OperatingPoint,
                     delta_c: float, C_O2_bulk: Optional[float] = None) -> InterfaceValues:
    """Electron potential, oxygen mass fraction and ion potential at h_b = h1 + delta_c."""
    if not 0.0 < delta_c <= geometry.thickness * (1.0 + 1e-12):
        raise DeltaExceedsElectrodeError(
            f"active layer thickness {delta_c:.6g} m outside (0, {geometry.thickness:.6g}] m"
        )
    if C_O2_bulk is None:
        C_O2_bulk = operating.C_O2_bulk
    j = operating.j_cell
    backing = max(geometry.thickness - delta_c, 0.0)
    V_b = operating.V2 + j / materials.sigma_el * backing
    C_b = C_O2_bulk - _o2_transport_factor(materials) * j * backing
    if C_b <= 0.0:
        raise LimitingCurrentError(
            f"oxygen depleted in the backing layer (C_O2 at h_b = {C_b:.4g}); "
            f"j_cell={j:g} A/m^2 exceeds the limiting current"
        )
    phi_b = V_b + concentration_overpotential(C_b, C_O2_bulk, operating.T)
    return InterfaceValues(V_b, C_b, phi_b)


@dataclass(frozen=True)
class BackingProfile:
    """Closed-form fields on the inactive zone [h_b, h2]."""

    geometry: CathodeGeometry
    materials: MaterialSet
    operating: OperatingPoint
    h_b: float
    phi_b: float
    C_O2_bulk: float

    def phi_el(self, y):
        return self.operating.V2 + self.operating.j_cell / self.materials.sigma_el * (self.geometry.h2 - np.asarray(y))

    def phi_ion(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.phi_b)

    def C_O2(self, y):
        return self.C_O2_bulk - _o2_transport_factor(self.materials) * self.operating.j_cell * (
            self.geometry.h2 - np.asarray(y))

    def j_el(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.operating.j_cell)

    def j_ion(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def J_O2(self, y):
        return np.full_like(np.asarray(y, dtype=float), -M_O2 * self.operating.j_cell / (4.0 * CONSTANTS.F))


def backing_profile(solution: CathodeSolution) -> BackingProfile:
    h_b = solution.geometry.h1 + (solution.delta_c or solution.geometry.thickness)
    return BackingProfile(solution.geometry, solution.materials, solution.operating, h_b,
                          solution.phi_b, solution.C_O2_bulk)


# --------------------------------------------------------------------------
# Iteration state
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IterationState:
    """Current iterate: the FieldSet plus the scalar unknown.

    ``delta_c`` is the unknown of the primary formulation. In the fixed
    thickness formulation ``C_O2_bulk`` is the unknown and ``fields.C_O2``
    holds the reduced mass fraction C_O2 / C_O2_bulk.
    """

    fields: FieldSet
    delta_c: float
    C_O2_bulk: float


@dataclass(frozen=True)
class _Problem:
    geometry: CathodeGeometry
    materials: MaterialSet
    operating: OperatingPoint
    z: np.ndarray
    source: Optional[np.ndarray] = None


def _max_rel_change(new, old):
    scale = np.max(np.abs(new))
    diff = np.max(np.abs(new - old))
    if scale == 0.0:
        return diff
    return diff / scale


def _residual(old: IterationState, new: IterationState, scalar: str) -> float:
    res = max(
        _max_rel_change(new.fields.phi_el, old.fields.phi_el),
        _max_rel_change(new.fields.phi_ion, old.fields.phi_ion),
        _max_rel_change(new.fields.C_O2, old.fields.C_O2),
        _max_rel_change(new.fields.Lambda, old.fields.Lambda),
    )
    a, b = getattr(new, scalar), getattr(old, scalar)
    return max(res, abs(a - b) / abs(a))


def _blend(old: IterationState, new: IterationState, omega: float) -> IterationState:
    if omega == 1.0:
        return new

    def mix(a, b):
        return omega * a + (1.0 - omega) * b

    f_new, f_old = new.fields, old.fields
    fields = replace(
        f_new,
        phi_el=mix(f_new.phi_el, f_old.phi_el),
        phi_ion=mix(f_new.phi_ion, f_old.phi_ion),
        C_O2=mix(f_new.C_O2, f_old.C_O2),
        Lambda=mix(f_new.Lambda, f_old.Lambda),
    )
    return IterationState(fields, mix(new.delta_c, old.delta_c), mix(new.C_O2_bulk, old.C_O2_bulk))


def _kinetics(phi_el, phi_ion, C_O2, problem: _Problem, settings: SolverSettings, C_O2_bulk):
    mat, op = problem.materials, problem.operating
    if np.any(C_O2 <= 0.0):
        raise LimitingCurrentError("oxygen mass fraction reached zero inside the active layer")
    eta_conc = concentration_overpotential(C_O2, C_O2_bulk, op.T)
    eta_act = activation_overpotential_modified(phi_ion, phi_el, eta_conc)
    p_O2 = partial_pressure_from_mass_fraction(C_O2, mat.rho_a, op.T, M_O2)
    i0 = exchange_current_density(p_O2, op.T, mat.exchange_model)
    i_ct = charge_transfer_current(eta_act, i0, mat.A_dpb, op.T, mat.exchange_model, settings.overflow_cap)
    return eta_conc, eta_act, i_ct


def _transport(Lambda, delta_c, iv: InterfaceValues, problem: _Problem, settings: SolverSettings):
    """Oxygen mass fraction and both potentials from the cumulative current."""
    mat, op, z = problem.materials, problem.operating, problem.z
    tail = tail_integrals(build_spline(z, Lambda, settings.spline_bc))
    C_O2 = iv.C_O2_b - _o2_transport_factor(mat) * delta_c * tail
    phi_el = iv.V_b + delta_c * tail / mat.sigma_el
    # the spline of (j - Lambda) is j minus the spline of Lambda
    phi_ion = iv.phi_b + delta_c * (op.j_cell * (1.0 - z) - tail) / mat.sigma_ion
    return C_O2, phi_el, phi_ion


def _normalised_cumulative(integrand, problem: _Problem, settings: SolverSettings):
    cum = cumulative_integral(build_spline(problem.z, integrand, settings.spline_bc))
    total = cum[-1]
    if not total > 0.0:
        raise NoCurrentError(f"charge-transfer integral is {total:.4g}; no current-producing state")
    return cum / total, total


def iterate_once(state: IterationState, settings: SolverSettings, problem: _Problem, omega=None):
    """One pass of the primary algorithm (kinetics, thickness, oxygen, potentials).

    Returns ``(blended_state, residual, raw_state)``.
    """
    op = problem.operating
    f = state.fields
    C_bulk = state.C_O2_bulk
    eta_conc, eta_act, i_ct = _kinetics(f.phi_el, f.phi_ion, f.C_O2, problem, settings, C_bulk)

    integrand = i_ct if problem.source is None else i_ct + problem.source
    shape, total = _normalised_cumulative(integrand, problem, settings)
    delta_c = op.j_cell / total
    Lambda = op.j_cell * shape

    iv = interface_values(problem.geometry, problem.materials, op, delta_c, C_bulk)
    C_O2, phi_el, phi_ion = _transport(Lambda, delta_c, iv, problem, settings)
    if np.any(C_O2 <= 0.0):
        raise LimitingCurrentError("oxygen mass fraction reached zero inside the active layer")
    eta_conc = concentration_overpotential(C_O2, C_bulk, op.T)

    fields = FieldSet(problem.z, phi_el, phi_ion, C_O2, eta_act, eta_conc, i_ct, Lambda)
    raw = IterationState(fields, delta_c, C_bulk)
    residual = _residual(state, raw, "delta_c")
    omega = settings.relaxation if omega is None else omega
    return _blend(state, raw, omega), residual, raw


def _damped_bulk(current, target, omega, max_factor=2.0):
    """Geometric relaxation of the bulk fraction with a bounded step.

    The raw update raises the integral to the power 1/beta, which magnifies
    early errors in the fields by orders of magnitude. Stepping in log space
    and capping the ratio keeps trial iterates out of the depleted region;
    the fixed point is unchanged.
    """
    step = omega * math.log(target / current)
    bound = math.log(max_factor)
    return current * math.exp(min(max(step, -bound), bound))


def _psi_pass(state: IterationState, settings: SolverSettings, problem: _Problem):
    """Kinetics on reduced fields: eta_act, psi, the normalised cumulative psi and the bulk estimate."""
    mat, op = problem.materials, problem.operating
    f = state.fields
    C_red = f.C_O2
    if np.any(C_red <= 0.0):
        raise LimitingCurrentError("reduced oxygen mass fraction reached zero")
    eta_conc = -CONSTANTS.R * op.T / (4.0 * CONSTANTS.F) * np.log(C_red)
    eta_act = activation_overpotential_modified(f.phi_ion, f.phi_el, eta_conc)
    ctx = KineticsContext.build(mat, op, state.C_O2_bulk)
    psi = psi_profile(C_red, eta_act, ctx, settings.overflow_cap)
    shape, total = _normalised_cumulative(psi, problem, settings)
    target = (op.j_cell / (state.delta_c * total)) ** (1.0 / mat.exchange_model.pressure_exponent)
    return eta_act, psi, shape, target


def _iterate_fixed_delta(state: IterationState, settings: SolverSettings, problem: _Problem, omega=None,
                         freeze_bulk=False):
    """One pass of the fixed-thickness variant; ``fields.C_O2`` is the reduced mass fraction.

    With ``freeze_bulk`` the bulk fraction is held at its current value and
    only the field shapes are iterated.
    """
    mat, op, geo = problem.materials, problem.operating, problem.geometry
    model = mat.exchange_model
    delta_c = state.delta_c
    thermal = CONSTANTS.R * op.T / (4.0 * CONSTANTS.F)
    eta_act, psi, shape, target = _psi_pass(state, settings, problem)
    if freeze_bulk:
        C_bulk = state.C_O2_bulk
    else:
        C_bulk = _damped_bulk(state.C_O2_bulk, target, 1.0)
    Lambda = op.j_cell * shape

    backing = geo.thickness - delta_c
    V_b = op.V2 + op.j_cell / mat.sigma_el * backing
    kappa = _o2_transport_factor(mat)
    C_red_b = 1.0 - kappa * op.j_cell * backing / C_bulk
    if C_red_b <= 0.0:
        raise LimitingCurrentError("oxygen depleted in the backing layer")
    phi_b = V_b - thermal * math.log(C_red_b)
    iv = InterfaceValues(V_b, C_red_b, phi_b)
    C_abs, phi_el, phi_ion = _transport(Lambda, delta_c, replace(iv, C_O2_b=C_red_b * C_bulk), problem, settings)
    C_red_new = C_abs / C_bulk
    if np.any(C_red_new <= 0.0):
        raise LimitingCurrentError("oxygen mass fraction reached zero inside the active layer")

    i_ct = C_bulk ** model.pressure_exponent * psi
    fields = FieldSet(problem.z, phi_el, phi_ion, C_red_new, eta_act, -thermal * np.log(C_red_new), i_ct, Lambda)
    raw = IterationState(fields, delta_c, C_bulk)
    residual = _residual(state, raw, "C_O2_bulk")
    omega = settings.relaxation if omega is None else omega
    return _blend(state, raw, omega), residual, raw


_RECOVERABLE = (DivergenceError, LimitingCurrentError, DeltaExceedsElectrodeError, NoCurrentError,
                FloatingPointError)


def _fixed_point(step, state: IterationState, settings: SolverSettings, problem: _Problem):
    """Relaxed Picard iteration with back-off.

    An infeasible trial iterate (overflow, depletion, delta_c outside the
    electrode) is retried by re-blending the last accepted step with half the
    relaxation factor. Past the warm-up, a residual that grows beyond
    ``settings.growth`` times the best one since the last back-off also
    halves the factor, and so does a best residual that has not improved for
    ``settings.stall`` iterations. The early transient and round-off wobbles
    near convergence are not treated as divergence.
    """
    omega = settings.relaxation
    history = []
    events = []
    best = math.inf
    last_gain = 0
    anchor = None  # (state before the last blend, raw iterate of that step)
    it = 0
    while it < settings.max_iter:
        it += 1
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                blended, residual, raw = step(state, settings, problem, omega)
        except _RECOVERABLE as exc:
            if anchor is None or omega / 2.0 < settings.min_relaxation:
                raise
            omega /= 2.0
            events.append((it, omega, type(exc).__name__))
            log.debug("iteration %d: %s, relaxation -> %g", it, exc, omega)
            state = _blend(anchor[0], anchor[1], omega)
            continue
        history.append(residual)
        if residual <= settings.tol:
            return raw, it, residual, history, events
        if residual < best:
            best, last_gain = residual, it
        growing = it > settings.warmup and residual > settings.growth * best
        stalled = it - last_gain >= settings.stall
        if (growing or stalled) and omega / 2.0 >= settings.min_relaxation:
            omega /= 2.0
            best, last_gain = residual, it
            reason = "residual increase" if growing else "stagnation"
            events.append((it, omega, reason))
            log.debug("iteration %d: %s at residual %.3g, relaxation -> %g", it, reason, residual, omega)
        anchor = (state, raw)
        state = _blend(state, raw, omega)
    raise MaxIterationsError(
        f"no convergence in {settings.max_iter} iterations (last residual {history[-1]:.3g})", history
    )


# --------------------------------------------------------------------------
# Public entry points
# --------------------------------------------------------------------------


def _problem(geometry, materials, operating, settings, source=None):
    z = Mesh(settings.N).z
    src = None if source is None else np.asarray(source(z), dtype=float)
    return _Problem(geometry, materials, operating, z, src)


def initialize_fields(settings: SolverSettings, geometry: CathodeGeometry, materials: MaterialSet,
                      operating: OperatingPoint, delta_c=None, C_O2_bulk=None) -> IterationState:
    """Boundary-consistent starting iterate.

    The default thickness is half the electrode, reduced when the linear ion
    potential drop across it would put the Butler-Volmer forward exponent
    beyond ``INITIAL_EXPONENT``.
    """
    z = Mesh(settings.N).z
    j = operating.j_cell
    if delta_c is None:
        model = materials.exchange_model
        thermal = CONSTANTS.R * operating.T / CONSTANTS.F
        limit = INITIAL_EXPONENT * thermal / model.forward_symmetry * materials.sigma_ion / max(j, 1e-300)
        delta_c = min(0.5 * geometry.thickness, limit)
    if C_O2_bulk is None:
        C_O2_bulk = operating.C_O2_bulk
    iv = interface_values(geometry, materials, operating, delta_c, C_O2_bulk)
    Lambda = j * z
    C_O2 = iv.C_O2_b - _o2_transport_factor(materials) * j * delta_c * (1.0 - z)
    if np.any(C_O2 <= 0.0):
        raise LimitingCurrentError("initial oxygen profile reaches zero; current above the limiting value")
    phi_el = iv.V_b + j * delta_c * (1.0 - z) / materials.sigma_el
    phi_ion = iv.phi_b + j * delta_c * (1.0 - z) / materials.sigma_ion
    eta_conc = concentration_overpotential(C_O2, C_O2_bulk, operating.T)
    eta_act = activation_overpotential_modified(phi_ion, phi_el, eta_conc)
    fields = FieldSet(z, phi_el, phi_ion, C_O2, eta_act, eta_conc, np.zeros_like(z), Lambda)
    return IterationState(fields, delta_c, C_O2_bulk)


def equilibrium_solution(geometry, materials, operating, settings) -> CathodeSolution:
    """Zero-current state: every field is constant and delta_c is undefined."""
    z = Mesh(settings.N).z
    C_bulk = operating.C_O2_bulk
    const = np.full_like(z, operating.V2)
    zeros = np.zeros_like(z)
    fields = FieldSet(z, const, const.copy(), np.full_like(z, C_bulk), zeros, zeros.copy(), zeros.copy(),
                      zeros.copy())
    return CathodeSolution(fields, None, operating.V2, operating.V2, C_bulk, C_bulk, 0, 0.0,
                           geometry, operating, materials)


def _finalise(raw: IterationState, problem: _Problem, settings, iterations, residual, history, events,
              reduced=False) -> CathodeSolution:
    geo, mat, op = problem.geometry, problem.materials, problem.operating
    f = raw.fields
    C_bulk = raw.C_O2_bulk
    C_O2 = f.C_O2 * C_bulk if reduced else f.C_O2
    eta_conc, eta_act, i_ct = _kinetics(f.phi_el, f.phi_ion, C_O2, problem, settings, C_bulk)
    fields = FieldSet(problem.z, f.phi_el, f.phi_ion, C_O2, eta_act, eta_conc, i_ct, f.Lambda)
    iv = interface_values(geo, mat, op, raw.delta_c, C_bulk)
    return CathodeSolution(fields, raw.delta_c, iv.V_b, iv.phi_b, iv.C_O2_b, C_bulk, iterations, residual,
                           geo, op, mat, tuple(history), tuple(events))


def solve(geometry: CathodeGeometry, materials: MaterialSet, operating: OperatingPoint,
          settings: SolverSettings = SolverSettings(), source: Optional[SourceTerm] = None,
          initial: Optional[IterationState] = None) -> CathodeSolution:
    """Solve for the fields and the active-layer thickness at a prescribed cell current.

    ``source`` is an optional extra volumetric current g(z) (A/m^3) added
    wherever the charge-transfer current is integrated; it is only used for
    manufactured-solution verification.
    """
    validate(geometry, materials, operating)
    if operating.j_cell == 0.0:
        return equilibrium_solution(geometry, materials, operating, settings)
    problem = _problem(geometry, materials, operating, settings, source)
    state = initial or initialize_fields(settings, geometry, materials, operating)
    raw, it, res, history, events = _fixed_point(iterate_once, state, settings, problem)
    return _finalise(raw, problem, settings, it, res, history, events)


def _bulk_secant(state: IterationState, settings: SolverSettings, problem: _Problem, max_outer=60):
    """Locate the bulk fraction by a secant iteration on log C_bulk.

    The recovered bulk value goes as the 1/beta power of the psi integral
    while the field shapes barely depend on it, so plain substitution creeps
    towards the answer with a contraction factor close to one. Each secant
    evaluation settles the shapes with the bulk value frozen (warm-started
    from the previous evaluation) and compares it with the value implied by
    the psi integral. Steps are capped at a factor of two.
    """
    frozen = partial(_iterate_fixed_delta, freeze_bulk=True)
    iterations, history, events = 0, [], []
    cap = math.log(2.0)

    def settle(st, log_c):
        nonlocal iterations
        st = replace(st, C_O2_bulk=math.exp(log_c))
        raw, it, _, hist, ev = _fixed_point(frozen, st, settings, problem)
        iterations += it
        history.extend(hist)
        events.extend(ev)
        mismatch = math.log(_psi_pass(raw, settings, problem)[3]) - log_c
        return raw, mismatch

    x0 = math.log(state.C_O2_bulk)
    state, f0 = settle(state, x0)
    x1 = x0 + min(max(f0, -cap), cap)
    for _ in range(max_outer):
        if abs(f0) <= settings.tol:
            break
        try:
            state, f1 = settle(state, x1)
        except LimitingCurrentError:
            # overshot into depletion: retreat halfway towards the last good point
            x1 = 0.5 * (x0 + x1)
            continue
        if abs(f1) <= settings.tol or f1 == f0:
            break
        step = -f1 * (x1 - x0) / (f1 - f0)
        x0, f0 = x1, f1
        x1 = x1 + min(max(step, -cap), cap)
    return state, iterations, history, events


def solve_fixed_delta(geometry: CathodeGeometry, materials: MaterialSet, operating: OperatingPoint,
                      delta_c: float, settings: SolverSettings = SolverSettings(),
                      bulk_guess: Optional[float] = None):
    """Prescribed active-layer thickness; the bulk oxygen mass fraction becomes the unknown.

    ``operating.x_O2_bulk`` only seeds the iteration unless ``bulk_guess``
    (a mass fraction) is given. Returns ``(solution, C_O2_bulk)``.
    """
    validate(geometry, materials, operating)
    if operating.j_cell <= 0.0:
        raise NoCurrentError("the fixed-thickness formulation needs a positive cell current")
    if materials.exchange_model.pressure_exponent == 0.0:
        raise ValidationError([("materials.exchange_model.pressure_exponent",
                                "must be non-zero to recover the bulk oxygen fraction")])
    if not 0.0 < delta_c <= geometry.thickness:
        raise DeltaExceedsElectrodeError(f"prescribed delta_c={delta_c} outside (0, {geometry.thickness}]")
    problem = _problem(geometry, materials, operating, settings)
    guess = operating.C_O2_bulk if bulk_guess is None else bulk_guess
    start = initialize_fields(settings, geometry, materials, operating, delta_c, guess)
    reduced = replace(start.fields, C_O2=start.fields.C_O2 / guess)
    state = IterationState(reduced, delta_c, guess)
    shaped, it0, history0, events0 = _bulk_secant(state, settings, problem)
    raw, it, res, history, events = _fixed_point(_iterate_fixed_delta, shaped, settings, problem)
    solution = _finalise(raw, problem, settings, it0 + it, res, history0 + history, events0 + events,
                         reduced=True)
    return solution, raw.C_O2_bulk


# --------------------------------------------------------------------------
# Post-processing
# --------------------------------------------------------------------------


def closed_form_checks(solution: CathodeSolution) -> dict:
    """Maximum relative deviation of the potentials from their closed forms.

    The closed forms follow from combining the charge and oxygen balances and
    hold for any kinetics, so with g = 0 they isolate discretisation and
    round-off error in the integral representation.
    """
    geo, mat, op = solution.geometry, solution.materials, solution.operating
    if solution.delta_c is None:
        return {"phi_el": 0.0, "phi_ion": 0.0}
    F, R = CONSTANTS.F, CONSTANTS.R
    j, T = op.j_cell, op.T
    C = solution.fields.C_O2
    C_bulk, C_b = solution.C_O2_bulk, solution.C_O2_b
    h_b = geo.h1 + solution.delta_c
    y = solution.y
    k = 4.0 * F * mat.rho_a * mat.D2 / M_O2
    phi_el = op.V2 + k / mat.sigma_el * (C_bulk - C)
    phi_ion = (op.V2 + R * T / (4.0 * F) * np.log(C_bulk / C_b) - k / mat.sigma_ion * (C_bulk - C)
               + j / mat.sigma_ion * (h_b - y) + j * (geo.h2 - h_b) * (1.0 / mat.sigma_el + 1.0 / mat.sigma_ion))

    def dev(num, ref):
        return float(np.max(np.abs(num - ref) / np.maximum(np.abs(ref), 1e-300)))

    return {"phi_el": dev(solution.fields.phi_el, phi_el), "phi_ion": dev(solution.fields.phi_ion, phi_ion)}


def total_overpotential(solution: CathodeSolution) -> float:
    """Activation plus concentration overpotential at the electrolyte interface (z = 0)."""
    return float(solution.fields.eta_act[0] + solution.fields.eta_conc[0])


def current_fraction_thicknesses(solution: CathodeSolution, fractions=(0.9, 0.95, 0.99),
                                 spline_bc=NATURAL, xtol=1e-13) -> list:
    """Smallest z at which the layer has produced the given fraction of j_cell."""
    z = solution.z
    Lam = solution.fields.Lambda
    j = solution.j_cell
    if solution.delta_c is None or j == 0.0:
        return [float("nan")] * len(fractions)
    spline = build_spline(z, Lam, spline_bc)
    out = []
    for frac in fractions:
        if not 0.0 < frac < 1.0:
            raise ValueError(f"fraction must lie in (0, 1), got {frac}")
        target = frac * j
        k = int(np.argmax(Lam >= target))
        if k == 0:
            out.append(0.0)
            continue
        lo, hi = z[k - 1], z[k]
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            if spline(mid) >= target:
                hi = mid
            else:
                lo = mid
        out.append(float(hi))
    return out


def solution_invariants(solution: CathodeSolution, tol=1e-8) -> dict:
    """Conservation, transmission, positivity and monotonicity checks; name -> bool."""
    f = solution.fields
    j = solution.j_cell
    scale = max(j, 1e-300)
    J_full = -M_O2 * j / (4.0 * CONSTANTS.F)
    monotone_slack = tol * np.max(np.abs(f.phi_el))
    checks = {
        "conservation": bool(np.allclose(solution.j_el + solution.j_ion, j, rtol=0, atol=1e-12 * scale)),
        "lambda_end": abs(f.Lambda[-1] - j) <= tol * scale,
        "j_el_zero_at_electrolyte": f.Lambda[0] == 0.0,
        "J_O2_zero_at_electrolyte": solution.J_O2[0] == 0.0,
        "J_O2_full_at_backing": abs(solution.J_O2[-1] - J_full) <= tol * abs(J_full) if j else True,
        "eta_act_nonnegative": bool(np.all(f.eta_act >= 0.0)),
        "i_ct_nonnegative": bool(np.all(f.i_ct >= 0.0)),
        "C_O2_positive": bool(np.all((f.C_O2 > 0.0) & (f.C_O2 < 1.0))),
        "C_O2_nondecreasing": bool(np.all(np.diff(f.C_O2) >= -tol * np.max(f.C_O2))),
        "phi_el_nonincreasing_in_z": bool(np.all(np.diff(f.phi_el) <= monotone_slack)),
        "phi_ion_above_phi_b": bool(np.all(f.phi_ion >= solution.phi_b - tol * abs(solution.phi_b))),
        "phi_ion_nonincreasing_in_z": bool(np.all(np.diff(f.phi_ion) <= tol * np.max(np.abs(f.phi_ion)))),
        "Lambda_nondecreasing": bool(np.all(np.diff(f.Lambda) >= -tol * scale)),
    }
    if solution.delta_c is not None:
        checks["delta_in_electrode"] = 0.0 < solution.delta_c <= solution.geometry.thickness
        checks["continuity_phi_el"] = abs(f.phi_el[-1] - solution.V_b) <= tol * max(abs(solution.V_b), 1e-12)
        checks["continuity_C_O2"] = abs(f.C_O2[-1] - solution.C_O2_b) <= tol * solution.C_O2_b
    return checks


__all__ = [
    "BackingProfile",
    "CathodeError",
    "InterfaceValues",
    "IterationState",
    "SolverSettings",
    "backing_profile",
    "closed_form_checks",
    "current_fraction_thicknesses",
    "equilibrium_solution",
    "initialize_fields",
    "interface_values",
    "iterate_once",
    "solution_invariants",
    "solve",
    "solve_fixed_delta",
    "total_overpotential",
]
