"""YAML run configuration.

Every physical key carries its unit as a suffix (``_m``, ``_K``, ``_C``,
``_S_per_m`` ...). Temperatures are written in degrees Celsius and
converted to kelvin only when domain objects are built, so a configuration
survives a load/dump cycle unchanged.

Schema (all sections optional except ``geometry``, ``materials`` and
``operating``)::

    geometry:
      h1_m                          electrolyte interface coordinate, m
      h2_m                          external boundary coordinate, m
    materials:
      sigma_el_S_per_m              effective electron conductivity, S/m
      sigma_ion_S_per_m             number, or
        arrhenius:                  sigma = reference * exp(-B (1/T - 1/T_ref))
          reference_S_per_m
          reference_temperature_K
          activation_temperature_K  B, K
      rho_a_kg_per_m3               number, or "ideal_gas" (O2/N2 mixture at T, p_total)
      D2_m2_per_s                   effective O2 diffusivity, m^2/s
      A_dpb_m2_per_m3               active area per volume, m^2/m^3
      exchange_current:
        prefactor                   A/m^2 per Pa**pressure_exponent
        pressure_exponent           -
        activation_energy_J_per_mol
        forward_symmetry            -
        backward_symmetry           -
    operating:
      temperature_C, j_cell_A_per_m2, V2_V, x_O2_bulk (mole fraction), p_total_Pa
    solver:
      nodes, tol, max_iter, relaxation, spline_bc ("natural" | "not-a-knot")
    sweep:
      temperatures_C, j_cell_A_per_m2 (lists)
    sensitivity:
      x_O2_bulk (list), temperature_C, j_cell_A_per_m2
    benchmark:
      alpha, nodes (list), thickness_m, temperature_C, j_cell_A_per_m2, V2_V
    crosscheck:
      bulk_guess_factor             seed for the recovered bulk fraction, relative to the true one
    compare:
      measured_csv                  path, relative to the config file
    output:
      directory, label, workers
"""
from __future__ import annotations

import copy
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import yaml

from ..core import (
    ATMOSPHERE,
    CathodeGeometry,
    ExchangeCurrentModel,
    MaterialSet,
    OperatingPoint,
    ValidationError,
    air_density,
    celsius_to_kelvin,
)
from ..quadrature import BOUNDARY_CONDITIONS
from ..solver import SolverSettings

IDEAL_GAS = "ideal_gas"


@dataclass(frozen=True)
class ArrheniusConductivity:
    reference_S_per_m: float
    reference_temperature_K: float
    activation_temperature_K: float

    def at(self, T: float) -> float:
        return self.reference_S_per_m * math.exp(
            -self.activation_temperature_K * (1.0 / T - 1.0 / self.reference_temperature_K))


@dataclass(frozen=True)
class ExchangeCurrentConfig:
    prefactor: float = 1.47e6
    pressure_exponent: float = 0.2
    activation_energy_J_per_mol: float = 85859.0
    forward_symmetry: float = 1.2
    backward_symmetry: float = 1.0

    def build(self) -> ExchangeCurrentModel:
        return ExchangeCurrentModel(self.prefactor, self.pressure_exponent, self.activation_energy_J_per_mol,
                                    self.forward_symmetry, self.backward_symmetry)


@dataclass(frozen=True)
class MaterialsConfig:
    sigma_el_S_per_m: float
    sigma_ion_S_per_m: Union[float, ArrheniusConductivity]
    rho_a_kg_per_m3: Union[float, str]
    D2_m2_per_s: float
    A_dpb_m2_per_m3: float
    exchange_current: ExchangeCurrentConfig = field(default_factory=ExchangeCurrentConfig)


@dataclass(frozen=True)
class OperatingConfig:
    temperature_C: float
    j_cell_A_per_m2: float
    V2_V: float
    x_O2_bulk: float = 0.21
    p_total_Pa: float = ATMOSPHERE


@dataclass(frozen=True)
class SolverConfig:
    nodes: int = 100
    tol: float = 1e-10
    max_iter: int = 5000
    relaxation: float = 0.5
    spline_bc: str = "natural"


@dataclass(frozen=True)
class SweepConfig:
    temperatures_C: tuple = ()
    j_cell_A_per_m2: tuple = ()


@dataclass(frozen=True)
class SensitivityConfig:
    x_O2_bulk: tuple = ()
    temperature_C: Optional[float] = None
    j_cell_A_per_m2: Optional[float] = None


@dataclass(frozen=True)
class BenchmarkConfig:
    alpha: float = 8.0
    nodes: tuple = (20, 50, 100, 200)
    thickness_m: float = 5e-5
    temperature_C: float = 700.0
    j_cell_A_per_m2: float = 1e5
    V2_V: float = 0.0


@dataclass(frozen=True)
class CrosscheckConfig:
    bulk_guess_factor: float = 0.8


@dataclass(frozen=True)
class CompareConfig:
    measured_csv: Optional[str] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    label: str = "run"
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    geometry: CathodeGeometry
    materials: MaterialsConfig
    operating: OperatingConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    crosscheck: CrosscheckConfig = field(default_factory=CrosscheckConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = "."

    # -- domain objects ---------------------------------------------------

    def materials_at(self, T: float, x_O2: Optional[float] = None, p_total: Optional[float] = None) -> MaterialSet:
        """Material set with temperature-dependent entries resolved at ``T`` (K)."""
        m = self.materials
        sigma_ion = m.sigma_ion_S_per_m
        if isinstance(sigma_ion, ArrheniusConductivity):
            sigma_ion = sigma_ion.at(T)
        rho = m.rho_a_kg_per_m3
        if rho == IDEAL_GAS:
            x = self.operating.x_O2_bulk if x_O2 is None else x_O2
            p = self.operating.p_total_Pa if p_total is None else p_total
            rho = air_density(T, p, x)
        return MaterialSet(float(m.sigma_el_S_per_m), float(sigma_ion), float(rho), float(m.D2_m2_per_s),
                           float(m.A_dpb_m2_per_m3), m.exchange_current.build())

    def operating_point(self, temperature_C=None, j_cell=None, x_O2=None, V2=None) -> OperatingPoint:
        op = self.operating
        return OperatingPoint(
            celsius_to_kelvin(op.temperature_C if temperature_C is None else temperature_C),
            float(op.j_cell_A_per_m2 if j_cell is None else j_cell),
            float(op.V2_V if V2 is None else V2),
            float(op.x_O2_bulk if x_O2 is None else x_O2),
            float(op.p_total_Pa),
        )

    def case(self, temperature_C=None, j_cell=None, x_O2=None, V2=None):
        """(geometry, materials, operating) for one operating point."""
        op = self.operating_point(temperature_C, j_cell, x_O2, V2)
        return self.geometry, self.materials_at(op.T, op.x_O2_bulk, op.p_total), op

    def solver_settings(self) -> SolverSettings:
        s = self.solver
        return SolverSettings(N=s.nodes, tol=s.tol, max_iter=s.max_iter, relaxation=s.relaxation,
                              min_relaxation=min(SolverSettings.min_relaxation, s.relaxation),
                              spline_bc=s.spline_bc)

    def measured_path(self) -> Optional[Path]:
        if self.compare.measured_csv is None:
            return None
        path = Path(self.compare.measured_csv)
        return path if path.is_absolute() else Path(self.base_dir) / path

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "base_dir":
                continue
            out[f.name] = _plain(getattr(self, f.name))
        out["geometry"] = {"h1_m": self.geometry.h1, "h2_m": self.geometry.h2}
        sigma_ion = self.materials.sigma_ion_S_per_m
        if isinstance(sigma_ion, ArrheniusConductivity):
            out["materials"]["sigma_ion_S_per_m"] = {"arrhenius": _plain(sigma_ion)}
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def with_overrides(self, tol=None, nodes=None, workers=None, out_dir=None) -> "RunConfig":
        cfg = self
        if tol is not None or nodes is not None:
            solver = replace(cfg.solver, **{k: v for k, v in (("tol", tol), ("nodes", nodes)) if v is not None})
            cfg = replace(cfg, solver=solver)
        if workers is not None or out_dir is not None:
            output = replace(cfg.output, **{k: v for k, v in (("workers", workers), ("directory", out_dir))
                                            if v is not None})
            cfg = replace(cfg, output=output)
        _check(cfg)
        return cfg


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (1e-10)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+][0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if hasattr(value, "__dataclass_fields__"):
        return {k: _plain(v) for k, v in asdict(value).items()}
    return value


# -- parsing ------------------------------------------------------------------


class _Reader:
    """Collects every problem in a config instead of stopping at the first."""

    def __init__(self):
        self.violations = []

    def section(self, data, key, required=True):
        if key not in data:
            if required:
                self.violations.append((key, "missing section"))
            return None
        value = data[key]
        if not isinstance(value, dict):
            self.violations.append((key, f"expected a mapping, got {type(value).__name__}"))
            return None
        return value

    def unknown(self, data, prefix, allowed):
        for k in data:
            if k not in allowed:
                self.violations.append((f"{prefix}.{k}" if prefix else k, "unknown key"))

    def number(self, data, prefix, key, default=None, required=True, integer=False):
        path = f"{prefix}.{key}"
        if key not in data:
            if required and default is None:
                self.violations.append((path, "missing"))
            return default
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.violations.append((path, f"expected a number, got {value!r}"))
            return default
        if integer:
            if isinstance(value, float) and not value.is_integer():
                self.violations.append((path, f"expected an integer, got {value!r}"))
                return default
            return int(value)
        if not math.isfinite(value):
            self.violations.append((path, f"must be finite, got {value!r}"))
            return default
        return float(value)

    def number_list(self, data, prefix, key, integer=False):
        path = f"{prefix}.{key}"
        if key not in data:
            return ()
        value = data[key]
        if not isinstance(value, list):
            self.violations.append((path, "expected a list"))
            return ()
        out = []
        for i, item in enumerate(value):
            v = self.number({key: item}, prefix, key, integer=integer)
            if v is None:
                self.violations[-1] = (f"{path}[{i}]", self.violations[-1][1])
            else:
                out.append(v)
        return tuple(out)


def _from_mapping(data: dict, base_dir=".") -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError([("<root>", "configuration must be a mapping")])
    r = _Reader()
    r.unknown(data, "", {f.name for f in fields(RunConfig)} - {"base_dir"})

    geo = r.section(data, "geometry")
    geometry = None
    if geo is not None:
        r.unknown(geo, "geometry", {"h1_m", "h2_m"})
        h1 = r.number(geo, "geometry", "h1_m", default=0.0)
        h2 = r.number(geo, "geometry", "h2_m")
        if h2 is not None:
            geometry = CathodeGeometry(h1, h2)

    mat = r.section(data, "materials")
    materials = None
    if mat is not None:
        r.unknown(mat, "materials", {f.name for f in fields(MaterialsConfig)})
        sigma_ion = _sigma_ion(r, mat)
        rho = mat.get("rho_a_kg_per_m3")
        if rho is None:
            r.violations.append(("materials.rho_a_kg_per_m3", "missing"))
        elif rho != IDEAL_GAS:
            rho = r.number(mat, "materials", "rho_a_kg_per_m3")
        ex = mat.get("exchange_current", {})
        exchange = ExchangeCurrentConfig()
        if not isinstance(ex, dict):
            r.violations.append(("materials.exchange_current", "expected a mapping"))
        else:
            r.unknown(ex, "materials.exchange_current", {f.name for f in fields(ExchangeCurrentConfig)})
            exchange = ExchangeCurrentConfig(**{
                f.name: r.number(ex, "materials.exchange_current", f.name, default=f.default)
                for f in fields(ExchangeCurrentConfig)})
        values = [r.number(mat, "materials", k) for k in ("sigma_el_S_per_m", "D2_m2_per_s", "A_dpb_m2_per_m3")]
        if None not in values and sigma_ion is not None and rho is not None:
            materials = MaterialsConfig(values[0], sigma_ion, rho, values[1], values[2], exchange)

    op = r.section(data, "operating")
    operating = None
    if op is not None:
        r.unknown(op, "operating", {f.name for f in fields(OperatingConfig)})
        vals = {
            "temperature_C": r.number(op, "operating", "temperature_C"),
            "j_cell_A_per_m2": r.number(op, "operating", "j_cell_A_per_m2"),
            "V2_V": r.number(op, "operating", "V2_V"),
            "x_O2_bulk": r.number(op, "operating", "x_O2_bulk", default=0.21),
            "p_total_Pa": r.number(op, "operating", "p_total_Pa", default=ATMOSPHERE),
        }
        if None not in vals.values():
            operating = OperatingConfig(**vals)

    sections = {}
    simple = {
        "solver": SolverConfig,
        "crosscheck": CrosscheckConfig,
        "output": OutputConfig,
        "compare": CompareConfig,
    }
    for name, cls in simple.items():
        sec = r.section(data, name, required=False)
        if sec is None:
            continue
        r.unknown(sec, name, {f.name for f in fields(cls)})
        kwargs = {}
        for f in fields(cls):
            if f.name not in sec:
                continue
            if f.type in ("int",):
                kwargs[f.name] = r.number(sec, name, f.name, default=f.default, integer=True)
            elif f.type in ("float",):
                kwargs[f.name] = r.number(sec, name, f.name, default=f.default)
            else:
                value = sec[f.name]
                if value is not None and not isinstance(value, str):
                    r.violations.append((f"{name}.{f.name}", f"expected a string, got {value!r}"))
                    continue
                kwargs[f.name] = value
        sections[name] = cls(**kwargs)

    sw = r.section(data, "sweep", required=False)
    if sw is not None:
        r.unknown(sw, "sweep", {f.name for f in fields(SweepConfig)})
        sections["sweep"] = SweepConfig(r.number_list(sw, "sweep", "temperatures_C"),
                                        r.number_list(sw, "sweep", "j_cell_A_per_m2"))
    se = r.section(data, "sensitivity", required=False)
    if se is not None:
        r.unknown(se, "sensitivity", {f.name for f in fields(SensitivityConfig)})
        sections["sensitivity"] = SensitivityConfig(
            r.number_list(se, "sensitivity", "x_O2_bulk"),
            r.number(se, "sensitivity", "temperature_C", required=False),
            r.number(se, "sensitivity", "j_cell_A_per_m2", required=False))
    be = r.section(data, "benchmark", required=False)
    if be is not None:
        r.unknown(be, "benchmark", {f.name for f in fields(BenchmarkConfig)})
        d = BenchmarkConfig()
        nodes = r.number_list(be, "benchmark", "nodes", integer=True) if "nodes" in be else d.nodes
        sections["benchmark"] = BenchmarkConfig(
            r.number(be, "benchmark", "alpha", default=d.alpha), nodes,
            r.number(be, "benchmark", "thickness_m", default=d.thickness_m),
            r.number(be, "benchmark", "temperature_C", default=d.temperature_C),
            r.number(be, "benchmark", "j_cell_A_per_m2", default=d.j_cell_A_per_m2),
            r.number(be, "benchmark", "V2_V", default=d.V2_V))

    if r.violations:
        # report range problems in the parts that did parse, alongside the structural ones
        try:
            partial = RunConfig(geometry, materials, operating, **sections)
            extra = _range_violations(partial)
        except (TypeError, AttributeError):
            extra = []
        raise ValidationError(r.violations + [e for e in extra if e not in r.violations])
    cfg = RunConfig(geometry, materials, operating, base_dir=str(base_dir), **sections)
    _check(cfg)
    return cfg


def _sigma_ion(r: _Reader, mat: dict):
    value = mat.get("sigma_ion_S_per_m")
    if value is None:
        r.violations.append(("materials.sigma_ion_S_per_m", "missing"))
        return None
    if isinstance(value, dict):
        arr = value.get("arrhenius")
        if not isinstance(arr, dict) or len(value) != 1:
            r.violations.append(("materials.sigma_ion_S_per_m", "expected a number or an 'arrhenius' mapping"))
            return None
        prefix = "materials.sigma_ion_S_per_m.arrhenius"
        r.unknown(arr, prefix, {f.name for f in fields(ArrheniusConductivity)})
        vals = [r.number(arr, prefix, f.name) for f in fields(ArrheniusConductivity)]
        return None if None in vals else ArrheniusConductivity(*vals)
    return r.number(mat, "materials", "sigma_ion_S_per_m")


def _range_violations(cfg: RunConfig) -> list:
    """Range checks that do not depend on a particular operating point."""
    v = []

    def positive(path, value):
        if not value > 0.0:
            v.append((path, f"must be positive, got {value!r}"))

    if not cfg.geometry.h2 > cfg.geometry.h1:
        v.append(("geometry.h2_m", "must exceed h1_m"))
    m = cfg.materials
    positive("materials.sigma_el_S_per_m", m.sigma_el_S_per_m)
    if isinstance(m.sigma_ion_S_per_m, ArrheniusConductivity):
        positive("materials.sigma_ion_S_per_m.arrhenius.reference_S_per_m", m.sigma_ion_S_per_m.reference_S_per_m)
        positive("materials.sigma_ion_S_per_m.arrhenius.reference_temperature_K",
                 m.sigma_ion_S_per_m.reference_temperature_K)
    else:
        positive("materials.sigma_ion_S_per_m", m.sigma_ion_S_per_m)
    if m.rho_a_kg_per_m3 != IDEAL_GAS:
        positive("materials.rho_a_kg_per_m3", m.rho_a_kg_per_m3)
    positive("materials.D2_m2_per_s", m.D2_m2_per_s)
    positive("materials.A_dpb_m2_per_m3", m.A_dpb_m2_per_m3)
    op = cfg.operating
    if not op.temperature_C > -273.15:
        v.append(("operating.temperature_C", "must be above absolute zero"))
    if not op.j_cell_A_per_m2 >= 0.0:
        v.append(("operating.j_cell_A_per_m2", "must be >= 0"))
    if not 0.0 < op.x_O2_bulk < 1.0:
        v.append(("operating.x_O2_bulk", "must lie in (0, 1)"))
    positive("operating.p_total_Pa", op.p_total_Pa)
    s = cfg.solver
    if s.nodes < 8:
        v.append(("solver.nodes", "need at least 8 nodes"))
    if not 0.0 < s.tol < 1.0:
        v.append(("solver.tol", "must lie in (0, 1)"))
    if s.max_iter < 1:
        v.append(("solver.max_iter", "must be >= 1"))
    if not 0.0 < s.relaxation <= 1.0:
        v.append(("solver.relaxation", "must lie in (0, 1]"))
    if s.spline_bc not in BOUNDARY_CONDITIONS:
        v.append(("solver.spline_bc", f"must be one of {BOUNDARY_CONDITIONS}"))
    for i, t in enumerate(cfg.sweep.temperatures_C):
        if not t > -273.15:
            v.append((f"sweep.temperatures_C[{i}]", "must be above absolute zero"))
    for i, j in enumerate(cfg.sweep.j_cell_A_per_m2):
        if not j >= 0.0:
            v.append((f"sweep.j_cell_A_per_m2[{i}]", "must be >= 0"))
    for i, x in enumerate(cfg.sensitivity.x_O2_bulk):
        if not 0.0 < x < 1.0:
            v.append((f"sensitivity.x_O2_bulk[{i}]", "must lie in (0, 1)"))
    b = cfg.benchmark
    if not b.alpha > 1.0:
        v.append(("benchmark.alpha", "must exceed 1"))
    for i, n in enumerate(b.nodes):
        if n < 8:
            v.append((f"benchmark.nodes[{i}]", "need at least 8 nodes"))
    positive("benchmark.thickness_m", b.thickness_m)
    if not b.j_cell_A_per_m2 > 0.0:
        v.append(("benchmark.j_cell_A_per_m2", "must be positive"))
    positive("crosscheck.bulk_guess_factor", cfg.crosscheck.bulk_guess_factor)
    if cfg.output.workers < 1:
        v.append(("output.workers", "must be >= 1"))
    if not cfg.output.label or any(c in cfg.output.label for c in "/\\"):
        v.append(("output.label", "must be a non-empty name without path separators"))
    return v


def _check(cfg: RunConfig):
    v = _range_violations(cfg)
    if v:
        raise ValidationError(v)


def from_dict(data: dict, base_dir=".") -> RunConfig:
    return _from_mapping(copy.deepcopy(data), base_dir)


def loads(text: str, base_dir=".") -> RunConfig:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ValidationError([("<yaml>", str(exc).replace("\n", " "))]) from None
    return _from_mapping(data, base_dir)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError([("--config", f"cannot read {path}: {exc.strerror}")]) from None
    return loads(text, base_dir=str(path.parent))
