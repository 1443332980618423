"""Run configuration: TOML files, shipped presets, validation.

A config may start from a preset (``preset = "figure1"``) and override any key.
Unknown keys are rejected; every value is checked before computation starts.
"""
from __future__ import annotations

import copy
import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import circuits as cm
from .errors import ParseError, ValidationError

EXPERIMENTS = ("figure1", "figure2", "figure3", "figure6", "invariants", "custom")
SYSTEMS = ("cshunt_1q", "cjj_2q", "custom")
FRAMES = ("computational", "instantaneous")
BACKENDS = ("auto", "compiled", "python")

SCHEMA: Dict[str, Any] = {
    "preset": str,
    "experiment": str,
    "system": str,
    "output_dir": str,
    "dump_operators": bool,
    "circuit": {
        "family": str,
        "kinetic_energy": float,
        "josephson_energy": float,
        "inductive_energy": float,
        "mutual_energy": float,
        "cshunt_scale": float,
        "reflect_cjj": bool,
        "cshunt_current": str,
        "cshunt_current_table": str,
    },
    "schedule": {
        "points": int,
        "s_grid": list,
        "cjj_flux": list,
        "kappa": str,
        "t_f": float,
    },
    "ising": {
        "local_fields": list,
        "couplings": list,
    },
    "mesh": {
        "points": int,
        "bounds": list,
        "dimension_cap": int,
    },
    "solver": {
        "eig_tol": float,
        "rtol": float,
        "atol": float,
        "backend": str,
        "workers": int,
    },
    "dynamics": {
        "frame": str,
        "output_points": int,
    },
    "sweep": {
        "t_f_list": list,
        "systems": list,
        "fidelity_level": float,
    },
    "invariants": {
        "refined_points": int,
        "dense_points_1q": int,
        "dense_points_2q": int,
        "include_two_qubit": bool,
    },
}

PRESET_NAMES = ("figure1", "figure2", "figure3", "figure6", "invariants")


@dataclass
class RunConfig:
    experiment: str
    system: str
    output_dir: str
    family: str
    params: cm.CircuitParams
    schedule: cm.Schedule
    ising: Optional[cm.IsingSpec]
    mesh_points: int
    mesh_bounds: Optional[Tuple[float, float]]
    dimension_cap: int
    eig_tol: float
    rtol: float
    atol: float
    backend: str
    workers: int
    frame: str
    output_points: int
    t_f_list: List[float]
    sweep_systems: List[str]
    fidelity_level: float
    cshunt_current: str
    cshunt_current_table: Optional[str]
    refined_points: int
    dense_points_1q: int
    dense_points_2q: int
    include_two_qubit: bool
    dump_operators: bool
    raw: Dict[str, Any] = field(repr=False, default_factory=dict)

    @property
    def t_f(self):
        return self.schedule.t_f

    def digest(self) -> str:
        # the output location does not change any result
        content = {k: v for k, v in self.raw.items() if k != "output_dir"}
        canon = json.dumps(content, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_output_dir(self, out) -> "RunConfig":
        new = copy.copy(self)
        new.output_dir = str(out)
        return new

    def with_workers(self, n) -> "RunConfig":
        new = copy.copy(self)
        new.workers = int(n)
        return new


# --------------------------------------------------------------------------
# parsing


def _parse_text(text: str, origin: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
        err = ParseError(f"{origin}: {exc}")
        err.line = line
        raise err from None


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ValidationError("preset", f"unknown preset {name!r} (choose from {', '.join(PRESET_NAMES)})")
    return resources.files("geoanneal").joinpath("presets", f"{name}.toml").read_text()


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _check_keys(data: dict, schema: dict, prefix=""):
    for key, value in data.items():
        name = f"{prefix}{key}"
        if key not in schema:
            raise ValidationError(name, "unknown key")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ValidationError(name, "expected a table")
            _check_keys(value, expected, name + ".")
        elif expected is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(name, f"expected a number, got {value!r}")
        elif expected is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(name, f"expected an integer, got {value!r}")
        elif not isinstance(value, expected):
            raise ValidationError(name, f"expected {expected.__name__}, got {value!r}")


def load_raw(path_or_preset) -> dict:
    """Parse a config file or preset name, resolving ``preset`` inheritance."""
    p = Path(str(path_or_preset))
    if p.exists():
        data = _parse_text(p.read_text(), str(p))
    elif str(path_or_preset) in PRESET_NAMES:
        data = _parse_text(preset_text(str(path_or_preset)), f"preset {path_or_preset}")
    else:
        raise ParseError(f"config file not found: {path_or_preset}")
    _check_keys(data, SCHEMA)
    if "preset" in data:
        base = _parse_text(preset_text(data["preset"]), f"preset {data['preset']}")
        data = _merge(base, {k: v for k, v in data.items() if k != "preset"})
    return data


def load_config(path_or_preset) -> RunConfig:
    return validate(load_raw(path_or_preset))


# --------------------------------------------------------------------------
# validation


def _positive(value, key):
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(key, f"must be positive, got {value!r}")
    return float(value)


def _choice(value, key, options):
    if value not in options:
        raise ValidationError(key, f"{value!r} not one of {', '.join(options)}")
    return value


def _number_list(value, key, length=None):
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                              for v in value):
        raise ValidationError(key, "expected a list of numbers")
    if length is not None and len(value) != length:
        raise ValidationError(key, f"expected {length} numbers, got {len(value)}")
    return [float(v) for v in value]


SYSTEM_FAMILY = {"cshunt_1q": "cshunt", "cjj_2q": "cjj"}


def validate(data: dict) -> RunConfig:
    _check_keys(data, SCHEMA)
    raw = copy.deepcopy(data)
    experiment = _choice(data.get("experiment", "custom"), "experiment", EXPERIMENTS)
    system = _choice(data.get("system", "cshunt_1q"), "system", SYSTEMS)
    circuit = data.get("circuit", {})
    if system == "custom":
        if "family" not in circuit:
            raise ValidationError("circuit.family", "required for a custom system")
        family = _choice(circuit["family"], "circuit.family", cm.FAMILIES)
    else:
        family = SYSTEM_FAMILY[system]
        if "family" in circuit and circuit["family"] != family:
            raise ValidationError("circuit.family", f"system {system} implies family {family}")

    preset = cm.cshunt_preset() if family == "cshunt" else cm.cjj_preset()
    kw = {}
    for name in ("kinetic_energy", "josephson_energy", "inductive_energy", "mutual_energy",
                 "cshunt_scale"):
        value = circuit.get(name, getattr(preset, name))
        kw[name] = None if value is None else _positive(value, f"circuit.{name}")
    kw["reflect_cjj"] = bool(circuit.get("reflect_cjj", preset.reflect_cjj))
    try:
        params = cm.CircuitParams(**kw)
    except ValidationError as exc:
        raise ValidationError(f"circuit.{exc.key}", str(exc).split(": ", 1)[-1]) from None
    if family == "cjj":
        params.require("inductive_energy", "mutual_energy")
    else:
        params.require("cshunt_scale")

    cshunt_current = _choice(circuit.get("cshunt_current", "script"), "circuit.cshunt_current",
                             ("script", "table"))
    table_path = circuit.get("cshunt_current_table")
    if cshunt_current == "table" and not table_path:
        raise ValidationError("circuit.cshunt_current_table", "required when cshunt_current = 'table'")

    sch = data.get("schedule", {})
    if "s_grid" in sch:
        s_grid = np.array(_number_list(sch["s_grid"], "schedule.s_grid"))
    else:
        pts = sch.get("points", 100)
        if pts < 3:
            raise ValidationError("schedule.points", "need at least 3 points")
        s_grid = cm.uniform_grid(pts)
    default_flux = (2.9, 2.2) if family == "cshunt" else (2.6, 1.9)
    flux = tuple(_number_list(sch.get("cjj_flux", list(default_flux)), "schedule.cjj_flux", 2))
    kappa = cm.kappa_by_name(sch.get("kappa", "identity"))
    t_f = sch.get("t_f")
    if t_f is not None:
        t_f = _positive(t_f, "schedule.t_f")
    try:
        schedule = cm.Schedule(s_grid, flux, kappa, t_f)
    except ValidationError:
        raise
    if experiment in ("figure1", "figure2") and t_f is None:
        raise ValidationError("schedule.t_f", "required for a dynamics experiment")

    ising = None
    if family == "cjj":
        isec = data.get("ising", {})
        fields = _number_list(isec.get("local_fields", [1.0, 0.4]), "ising.local_fields", 2)
        couplings = isec.get("couplings", [[0, 1, -0.7]])
        if not isinstance(couplings, list):
            raise ValidationError("ising.couplings", "expected a list of [i, j, J]")
        parsed = []
        for entry in couplings:
            if (not isinstance(entry, list) or len(entry) != 3 or not isinstance(entry[0], int)
                    or not isinstance(entry[1], int)):
                raise ValidationError("ising.couplings", f"expected [i, j, J], got {entry!r}")
            parsed.append((entry[0], entry[1], float(entry[2])))
        ising = cm.IsingSpec(tuple(fields), tuple(parsed))
    elif "ising" in data:
        raise ValidationError("ising", "only the CJJ pair takes Ising couplings")

    mesh = data.get("mesh", {})
    mesh_points = mesh.get("points", 600 if family == "cshunt" else 200)
    if mesh_points < 3:
        raise ValidationError("mesh.points", "need at least 3 points")
    bounds = mesh.get("bounds")
    if bounds is not None:
        bounds = tuple(_number_list(bounds, "mesh.bounds", 2))
        if not bounds[0] < bounds[1]:
            raise ValidationError("mesh.bounds", "lower < upper required")
    cap = mesh.get("dimension_cap", 400_000)
    if cap < 1:
        raise ValidationError("mesh.dimension_cap", "must be positive")

    solver = data.get("solver", {})
    eig_tol = _positive(solver.get("eig_tol", 1e-9), "solver.eig_tol")
    rtol = _positive(solver.get("rtol", 1e-9), "solver.rtol")
    atol = _positive(solver.get("atol", 1e-12), "solver.atol")
    backend = _choice(solver.get("backend", "auto"), "solver.backend", BACKENDS)
    workers = solver.get("workers", 1)
    if workers < 1:
        raise ValidationError("solver.workers", "must be at least 1")

    dyn = data.get("dynamics", {})
    frame = _choice(dyn.get("frame", "computational"), "dynamics.frame", FRAMES)
    output_points = dyn.get("output_points", 101)
    if output_points < 2:
        raise ValidationError("dynamics.output_points", "need at least 2")

    sweep = data.get("sweep", {})
    t_f_list = [_positive(v, "sweep.t_f_list") for v in
                _number_list(sweep.get("t_f_list", [1, 2, 5, 10, 20, 50, 100]), "sweep.t_f_list")]
    sweep_systems = sweep.get("systems", ["cshunt_1q", "cjj_2q"])
    for name in sweep_systems:
        _choice(name, "sweep.systems", ("cshunt_1q", "cjj_2q"))
    level = sweep.get("fidelity_level", 0.999)
    if not 0 < level < 1:
        raise ValidationError("sweep.fidelity_level", "must lie in (0, 1)")

    inv = data.get("invariants", {})
    return RunConfig(
        experiment=experiment, system=system,
        output_dir=data.get("output_dir", f"out/{experiment}"),
        family=family, params=params, schedule=schedule, ising=ising,
        mesh_points=int(mesh_points), mesh_bounds=bounds, dimension_cap=int(cap),
        eig_tol=eig_tol, rtol=rtol, atol=atol, backend=backend, workers=int(workers),
        frame=frame, output_points=int(output_points),
        t_f_list=t_f_list, sweep_systems=list(sweep_systems), fidelity_level=float(level),
        cshunt_current=cshunt_current, cshunt_current_table=table_path,
        refined_points=int(inv.get("refined_points", 397)),
        dense_points_1q=int(inv.get("dense_points_1q", 80)),
        dense_points_2q=int(inv.get("dense_points_2q", 40)),
        include_two_qubit=bool(inv.get("include_two_qubit", True)),
        dump_operators=bool(data.get("dump_operators", False)),
        raw=raw,
    )
