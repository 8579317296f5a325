"""Experiment configuration files (TOML).

Example::

    experiment = "optimize"
    output_dir = "results/disk"

    [geometry]            # exactly one of disk_radius, polygon, mesh_file
    disk_radius = 1.0
    refinement_level = 4

    [params]
    beta = 1.0
    mass = 6.283185307179586
    source = 1.0          # or source_file = "f.txt", one value per vertex

    [optimize]
    tol_energy = 1e-12

Sections per experiment and their keys are listed in ``SECTIONS``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXPERIMENTS = ("solve_limit", "solve_layer", "gamma_sweep", "optimize", "bound_check", "oracle", "dirichlet_limit")

# allowed keys per section, with defaults (None = required when used)
SECTIONS = {
    "geometry": {
        "disk_radius": None,
        "refinement_level": 4,
        "polygon": None,
        "edge_length": None,
        "mesh_file": None,
    },
    "params": {"beta": 1.0, "mass": None, "source": 1.0, "source_file": None, "insulation": 1.0},
    "solver": {"tol": 1e-10, "max_iter": None},
    "output": {"dump_mesh": False, "write_fields": True},
    "solve_layer": {"eps": 0.05, "n_layers": None},
    "gamma_sweep": {"eps": [0.1, 0.05, 0.025, 0.0125]},
    "optimize": {"tol_energy": 1e-12, "max_outer": 500},
    "bound_check": {"tol_energy": 1e-12, "max_outer": 500, "n_levels": 64},
    "dirichlet_limit": {"betas": [1.0, 10.0, 100.0]},
    "oracle": {"R": 1.0, "n": 2, "beta": 1.0, "h": 1.0, "eps": None},
}
TOP_LEVEL = ("experiment", "output_dir")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    output_dir: str = "results"
    sections: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def get(self, section: str, key: str):
        return self.sections.get(section, {}).get(key, SECTIONS[section][key])

    def require(self, section: str, key: str):
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"[{section}] {key}: required for experiment '{self.experiment}'")
        return value

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        """Resolved inputs, defaults included, for the summary file."""
        out = {"experiment": self.experiment}
        for name in ("geometry", "params", "solver", self.experiment):
            if name in SECTIONS:
                out[name] = {k: self.get(name, k) for k in SECTIONS[name]}
        return out


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_config(data)
    cfg.base_dir = path.parent
    return cfg


def _positive(where, value, integer=False):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{where}: must be a positive {'integer' if integer else 'number'}, got {value!r}")


def parse_config(data: dict) -> ExperimentConfig:
    for key in data:
        if key not in TOP_LEVEL and key not in SECTIONS:
            raise ConfigError(f"{key}: unknown key or section")
    experiment = data.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}; got {experiment!r}")
    out_dir = data.get("output_dir", "results")
    if not isinstance(out_dir, str):
        raise ConfigError("output_dir: must be a string")
    sections = {}
    for name in SECTIONS:
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}]: must be a table")
        for key in sec:
            if key not in SECTIONS[name]:
                raise ConfigError(f"[{name}] {key}: unknown key")
        sections[name] = dict(sec)
    cfg = ExperimentConfig(experiment, out_dir, sections)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment != "oracle":
        geo = cfg.sections["geometry"]
        sources = [k for k in ("disk_radius", "polygon", "mesh_file") if k in geo]
        if len(sources) != 1:
            raise ConfigError("[geometry]: exactly one of disk_radius, polygon, mesh_file is required")
        if "disk_radius" in geo:
            _positive("[geometry] disk_radius", geo["disk_radius"])
            lvl = cfg.get("geometry", "refinement_level")
            if isinstance(lvl, bool) or not isinstance(lvl, int) or lvl < 0:
                raise ConfigError(f"[geometry] refinement_level: must be a non-negative integer, got {lvl!r}")
        if "polygon" in geo:
            poly = geo["polygon"]
            if not (isinstance(poly, list) and len(poly) >= 3 and all(isinstance(p, list) and len(p) == 2 for p in poly)):
                raise ConfigError("[geometry] polygon: must be a list of [x, y] pairs (at least 3)")
            _positive("[geometry] edge_length", cfg.require("geometry", "edge_length"))
        if "source" in cfg.sections["params"] and "source_file" in cfg.sections["params"]:
            raise ConfigError("[params]: give either source or source_file, not both")
        _positive("[params] beta", cfg.get("params", "beta"))
        src = cfg.get("params", "source")
        if isinstance(src, bool) or not isinstance(src, (int, float)) or src < 0:
            raise ConfigError(f"[params] source: must be a non-negative number, got {src!r}")
        ins = cfg.get("params", "insulation")
        if isinstance(ins, bool) or not isinstance(ins, (int, float)) or ins < 0:
            raise ConfigError(f"[params] insulation: must be a non-negative number, got {ins!r}")
        if cfg.experiment in ("optimize", "bound_check"):
            _positive("[params] mass", cfg.require("params", "mass"))
    _positive("[solver] tol", cfg.get("solver", "tol"))
    if cfg.get("solver", "tol") >= 1:
        raise ConfigError("[solver] tol: must be below 1")
    if cfg.get("solver", "max_iter") is not None:
        _positive("[solver] max_iter", cfg.get("solver", "max_iter"), integer=True)
    exp = cfg.experiment
    if exp == "solve_layer":
        _positive("[solve_layer] eps", cfg.get("solve_layer", "eps"))
    elif exp == "gamma_sweep":
        eps = cfg.get("gamma_sweep", "eps")
        if not isinstance(eps, list) or len(eps) < 2:
            raise ConfigError("[gamma_sweep] eps: must be a list of at least two values")
        for e in eps:
            _positive("[gamma_sweep] eps", e)
    elif exp in ("optimize", "bound_check"):
        _positive(f"[{exp}] tol_energy", cfg.get(exp, "tol_energy"))
        _positive(f"[{exp}] max_outer", cfg.get(exp, "max_outer"), integer=True)
        if exp == "bound_check":
            _positive("[bound_check] n_levels", cfg.get(exp, "n_levels"), integer=True)
    elif exp == "dirichlet_limit":
        betas = cfg.get("dirichlet_limit", "betas")
        if not isinstance(betas, list) or len(betas) < 2:
            raise ConfigError("[dirichlet_limit] betas: must be a list of at least two values")
        for b in betas:
            _positive("[dirichlet_limit] betas", b)
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ConfigError("[dirichlet_limit] betas: must be increasing")
    elif exp == "oracle":
        for key in ("R", "beta"):
            _positive(f"[oracle] {key}", cfg.get("oracle", key))
        _positive("[oracle] n", cfg.get("oracle", "n"), integer=True)
        if cfg.get("oracle", "n") < 2:
            raise ConfigError("[oracle] n: must be at least 2")
        h = cfg.get("oracle", "h")
        if isinstance(h, bool) or not isinstance(h, (int, float)) or h < 0:
            raise ConfigError("[oracle] h: must be a non-negative number")
        if cfg.get("oracle", "eps") is not None:
            _positive("[oracle] eps", cfg.get("oracle", "eps"))
