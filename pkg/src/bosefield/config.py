"""Run configuration: JSON ingestion, defaults and validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .dynamics import DysonConfig, HamiltonianConfig, PotentialSpec
from .fock import FockBasis, GridSpace

__all__ = [
    "ConfigError",
    "GridSettings",
    "PotentialSettings",
    "WindowSettings",
    "TimeSettings",
    "Tolerances",
    "RunConfig",
    "parse_config",
    "config_from_dict",
]


class ConfigError(ValueError):
    """Invalid configuration; ``issues`` lists one message per offending field."""

    def __init__(self, issues: list[str]):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


@dataclass(frozen=True)
class GridSettings:
    points: int = 8
    spacing: float = 0.5


@dataclass(frozen=True)
class PotentialSettings:
    kind: str = "gaussian"
    strength: float = 1.0
    width: float = 1.0


@dataclass(frozen=True)
class WindowSettings:
    """Test function window; ``None`` indices resolve to ``1`` and ``points - 2``."""

    start_index: int | None = None
    end_index: int | None = None
    profile: str = "bump"


@dataclass(frozen=True)
class TimeSettings:
    t_max: float = 0.4
    dyson_order: int = 8
    quad_steps: int = 64
    quad_rule: str = "simpson"


@dataclass(frozen=True)
class Tolerances:
    """``structural`` for exact identities, ``dyson`` for the series, ``regression`` for quadrature-limited checks."""

    structural: float = 1e-10
    dyson: float = 1e-6
    regression: float = 1e-8


@dataclass(frozen=True)
class RunConfig:
    grid: GridSettings = field(default_factory=GridSettings)
    nmax: int = 3
    kappa: float = 0.3
    potential: PotentialSettings = field(default_factory=PotentialSettings)
    f_window: WindowSettings = field(default_factory=WindowSettings)
    time: TimeSettings = field(default_factory=TimeSettings)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 20240601
    workers: int = 1

    # derived objects

    def grid_space(self) -> GridSpace:
        return GridSpace(self.grid.points, self.grid.spacing)

    def basis(self) -> FockBasis:
        return FockBasis(self.grid_space(), self.nmax)

    def hamiltonian_config(self) -> HamiltonianConfig:
        p = self.potential
        return HamiltonianConfig(self.kappa, PotentialSpec(p.kind, p.strength, p.width))

    def dyson_config(self) -> DysonConfig:
        t = self.time
        return DysonConfig(t=t.t_max, order=t.dyson_order, steps=t.quad_steps, rule=t.quad_rule,
                           tolerance=self.tolerances.dyson)

    def test_function(self) -> np.ndarray:
        grid = self.grid_space()
        w = self.f_window
        if w.profile == "mode":
            return grid.mode(w.start_index)
        return grid.bump(w.start_index, w.end_index)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


_SECTIONS = {
    "grid": GridSettings,
    "potential": PotentialSettings,
    "f_window": WindowSettings,
    "time": TimeSettings,
    "tolerances": Tolerances,
}
_SCALARS = {"nmax": int, "kappa": float, "seed": int, "workers": int}


def _coerce(value, typ, name: str, issues: list[str]):
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            issues.append(f"{name}: expected an integer, got {value!r}")
            return None
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            issues.append(f"{name}: expected a number, got {value!r}")
            return None
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            issues.append(f"{name}: expected a string, got {value!r}")
            return None
        return value
    return value


_FIELD_TYPES = {
    "grid": {"points": int, "spacing": float},
    "potential": {"kind": str, "strength": float, "width": float},
    "f_window": {"start_index": int, "end_index": int, "profile": str},
    "time": {"t_max": float, "dyson_order": int, "quad_steps": int, "quad_rule": str},
    "tolerances": {"structural": float, "dyson": float, "regression": float},
}


def config_from_dict(data: Any) -> RunConfig:
    """Build and validate a :class:`RunConfig` from parsed JSON."""
    if not isinstance(data, dict):
        raise ConfigError([f"top level: expected a JSON object, got {type(data).__name__}"])
    issues: list[str] = []
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                issues.append(f"{key}: expected an object")
                continue
            sub = {}
            for k, v in value.items():
                if k not in _FIELD_TYPES[key]:
                    issues.append(f"{key}.{k}: unknown field")
                    continue
                c = _coerce(v, _FIELD_TYPES[key][k], f"{key}.{k}", issues)
                if c is not None:
                    sub[k] = c
            kwargs[key] = _SECTIONS[key](**sub)
        elif key in _SCALARS:
            c = _coerce(value, _SCALARS[key], key, issues)
            if c is not None:
                kwargs[key] = c
        else:
            issues.append(f"{key}: unknown field")
    if issues:
        raise ConfigError(issues)
    cfg = RunConfig(**kwargs)
    return _validate(cfg)


def _validate(cfg: RunConfig) -> RunConfig:
    issues: list[str] = []
    g = cfg.grid
    if g.points < 3:
        issues.append(f"grid.points: need at least 3 points, got {g.points}")
    if not (math.isfinite(g.spacing) and g.spacing > 0):
        issues.append(f"grid.spacing: must be positive and finite, got {g.spacing}")
    if cfg.nmax < 2:
        issues.append(f"nmax: need at least 2 so that a safe interacting sector exists, got {cfg.nmax}")
    if not (math.isfinite(cfg.kappa) and cfg.kappa >= 0):
        issues.append(f"kappa: must be finite and >= 0, got {cfg.kappa}")
    p = cfg.potential
    if p.kind not in ("gaussian", "cosine_bump", "zero"):
        issues.append(f"potential.kind: expected gaussian, cosine_bump or zero, got {p.kind!r}")
    if not math.isfinite(p.strength):
        issues.append(f"potential.strength: must be finite, got {p.strength}")
    if not (math.isfinite(p.width) and p.width > 0):
        issues.append(f"potential.width: must be positive, got {p.width}")
    w = cfg.f_window
    start = 1 if w.start_index is None else w.start_index
    if w.end_index is None:
        end = start if w.profile == "mode" else g.points - 2
    else:
        end = w.end_index
    if w.profile not in ("bump", "mode"):
        issues.append(f"f_window.profile: expected bump or mode, got {w.profile!r}")
    if not 0 < start <= end < g.points - 1:
        issues.append(f"f_window: window [{start}, {end}] must lie strictly inside the grid 0..{g.points - 1}")
    if w.profile == "mode" and start != end:
        issues.append("f_window: profile 'mode' needs start_index == end_index")
    t = cfg.time
    if not math.isfinite(t.t_max):
        issues.append(f"time.t_max: must be finite, got {t.t_max}")
    if t.dyson_order < 0:
        issues.append(f"time.dyson_order: must be >= 0, got {t.dyson_order}")
    if t.quad_steps < 2:
        issues.append(f"time.quad_steps: must be >= 2, got {t.quad_steps}")
    if t.quad_rule not in ("simpson", "trapezoid"):
        issues.append(f"time.quad_rule: expected simpson or trapezoid, got {t.quad_rule!r}")
    for name in ("structural", "dyson", "regression"):
        val = getattr(cfg.tolerances, name)
        if not (val > 0 and math.isfinite(val)):
            issues.append(f"tolerances.{name}: must be positive, got {val}")
    if cfg.seed < 0:
        issues.append(f"seed: must be >= 0, got {cfg.seed}")
    if cfg.workers < 1:
        issues.append(f"workers: must be >= 1, got {cfg.workers}")
    if issues:
        raise ConfigError(issues)
    return replace(cfg, f_window=WindowSettings(start, end, w.profile))


def parse_config(path) -> RunConfig:
    """Read a JSON configuration file; missing fields take their defaults."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror or exc}"]) from exc
    if not text.strip():
        raise ConfigError([f"config: {path} is empty"])
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    return config_from_dict(data)


def default_config() -> RunConfig:
    """Validated configuration with every field at its default."""
    return config_from_dict({})


__all__.append("default_config")
