"""JSON run configuration: parsing, validation and construction of run objects."""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DomainError, PreconditionError
from .estimates import WeightSpec
from .flux import Region
from .mathlib import ModelParams
from .solver import InitialData, RadialGrid, SolverConfig

OUTPUT_ROOT_ENV = "WAVELAB_OUTPUT_ROOT"
PADDING_MARGIN = 2.0

DEFAULTS = {
    "model": {"d": 3, "p": 3.0, "allow_outside_a1": False},
    "initial": {"kind": "compact-bump", "amplitude": 1.0, "center": 2.0, "width": 1.0,
                "velocity_profile": "zero"},
    "grid": {"r_max": "auto", "cells": 4096, "h": None, "cfl": 0.8},
    "time": {"t_final": 20.0, "diagnostic_stride": 10},
    "nonlinearity_on": True,
    "diagnostics": {
        "energies": True,
        "cones": {"taus": [], "ss": []},
        "regions": [],
        "morawetz_R": [],
        "weights": [],
        "kappa_list": [],
        "scattering_T_list": [],
        "interior_c_list": [],
    },
    "output_dir": "runs/default",
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if k not in base:
            raise ConfigError("unknown key", f"{path}{k}")
        if isinstance(base[k], dict) and k != "cones" or (k == "cones" and isinstance(v, dict)):
            if not isinstance(v, dict):
                raise ConfigError("expected an object", f"{path}{k}")
            out[k] = _merge(base[k], v, f"{path}{k}.") if k != "cones" else {**base[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


def _number(value, name, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", name)
    if not math.isfinite(value):
        raise ConfigError("must be finite", name)
    if positive and value <= 0:
        raise ConfigError(f"must be positive, got {value}", name)
    if integer and int(value) != value:
        raise ConfigError(f"must be an integer, got {value}", name)
    return int(value) if integer else float(value)


@dataclass
class RunConfig:
    """A validated configuration plus the objects it describes."""

    raw: dict
    params: ModelParams
    initial: InitialData
    grid: RadialGrid
    solver: SolverConfig
    stride: int
    regions: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    output_dir: Path = Path("runs/default")

    @property
    def diagnostics(self) -> dict:
        return self.raw["diagnostics"]

    @classmethod
    def from_dict(cls, data: dict | None = None) -> "RunConfig":
        raw = _merge(DEFAULTS, data or {})
        m = raw["model"]
        try:
            params = ModelParams(_number(m["d"], "model.d", integer=True),
                                 _number(m["p"], "model.p"),
                                 bool(m.get("allow_outside_a1", False)))
        except DomainError as exc:
            raise ConfigError(str(exc), "model") from exc

        ini = raw["initial"]
        try:
            initial = InitialData(kind=ini["kind"],
                                  amplitude=_number(ini["amplitude"], "initial.amplitude"),
                                  center=_number(ini["center"], "initial.center"),
                                  width=_number(ini["width"], "initial.width", positive=True),
                                  velocity_profile=ini["velocity_profile"])
        except (ValueError, DomainError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), "initial") from exc

        tm = raw["time"]
        t_final = _number(tm["t_final"], "time.t_final", positive=True)
        stride = _number(tm["diagnostic_stride"], "time.diagnostic_stride", positive=True, integer=True)

        diag = raw["diagnostics"]
        regions = []
        for i, reg in enumerate(diag["regions"]):
            name = reg.get("name", f"region{i}") if isinstance(reg, dict) else f"region{i}"
            verts = reg.get("vertices") if isinstance(reg, dict) else reg
            try:
                regions.append(Region.from_vertices(verts, name))
            except (ValueError, TypeError) as exc:
                raise ConfigError(str(exc), f"diagnostics.regions[{i}]") from exc
        if len({r.name for r in regions}) != len(regions):
            raise ConfigError("region names must be unique", "diagnostics.regions")
        weights = []
        for i, w in enumerate(diag["weights"]):
            try:
                spec = WeightSpec(**w)
                spec.validate()
            except (TypeError, PreconditionError) as exc:
                raise ConfigError(str(exc), f"diagnostics.weights[{i}]") from exc
            weights.append(spec)
        for k in diag["kappa_list"]:
            if not 0 < _number(k, "diagnostics.kappa_list") < 1:
                raise ConfigError(f"kappa must lie in (0, 1), got {k}", "diagnostics.kappa_list")
            spec = WeightSpec("power", float(k))
            if spec not in weights:
                weights.append(spec)
        for c in diag["interior_c_list"]:
            if not 0 < _number(c, "diagnostics.interior_c_list") < 1:
                raise ConfigError(f"c must lie in (0, 1), got {c}", "diagnostics.interior_c_list")
        Ts = [_number(T, "diagnostics.scattering_T_list", positive=True)
              for T in diag["scattering_T_list"]]
        if any(T > t_final + 1e-9 for T in Ts):
            raise ConfigError("scattering times must not exceed t_final", "diagnostics.scattering_T_list")
        for R in diag["morawetz_R"]:
            _number(R, "diagnostics.morawetz_R", positive=True)
        for key in ("taus", "ss"):
            for x in diag["cones"].get(key, []):
                _number(x, f"diagnostics.cones.{key}")

        grid = _build_grid(raw["grid"], params.d, initial, t_final, Ts, regions, diag)
        try:
            solver = SolverConfig(t_final=t_final, cfl=_number(raw["grid"]["cfl"], "grid.cfl", positive=True),
                                  nonlinearity_on=bool(raw["nonlinearity_on"]))
            solver.check_stability(grid)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), "grid.cfl") from exc
        for reg in regions:
            if reg.r_max > grid.r_max or reg.t_range[0] < 0 or reg.t_range[1] > t_final + 1e-9:
                raise ConfigError(f"region {reg.name!r} is outside the computational domain",
                                  "diagnostics.regions")
        return cls(raw, params, initial, grid, solver, stride, regions, weights,
                   resolve_output(raw["output_dir"]))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"cannot read {path}", "config") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "config") from exc
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", "config")
        return cls.from_dict(data)

    def resolved(self) -> dict:
        """The configuration with auto fields filled in (what the manifest echoes)."""
        out = copy.deepcopy(self.raw)
        out["grid"] = {"r_max": self.grid.r_max, "cells": self.grid.n, "h": self.grid.h,
                       "cfl": self.solver.cfl}
        return out


def required_radius(initial: InitialData, t_final: float, scattering_T=(), extra=0.0) -> float:
    """Smallest r_max that keeps the outer boundary causally invisible."""
    horizon = max([t_final] + [2.0 * T for T in scattering_T])
    return max(initial.support_radius() + horizon, extra) + PADDING_MARGIN


def _build_grid(g, d, initial, t_final, Ts, regions, diag) -> RadialGrid:
    extra = max([r.r_max for r in regions] + [0.0])
    need = required_radius(initial, t_final, Ts, extra)
    r_max = g["r_max"]
    if r_max == "auto":
        r_max = float(math.ceil(need))
    else:
        r_max = _number(r_max, "grid.r_max", positive=True)
        if r_max < need - PADDING_MARGIN + 1e-12:
            raise ConfigError(
                f"{r_max} is too small for causal padding; need at least "
                f"{need - PADDING_MARGIN:.6g} (use 'auto')", "grid.r_max")
    if g.get("h") is not None:
        h = _number(g["h"], "grid.h", positive=True)
        cells = int(math.ceil(r_max / h - 1e-9))
    else:
        cells = _number(g["cells"], "grid.cells", positive=True, integer=True)
        h = r_max / cells
    if cells < 8:
        raise ConfigError("need at least 8 cells", "grid.cells")
    return RadialGrid(d, h, cells)


def resolve_output(path) -> Path:
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p
