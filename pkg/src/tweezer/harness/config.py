"""Experiment configuration: flat ``key = value unit`` text files.

Example::

    sequence = release_recapture
    power = 10 mW
    temperature = 168 uK
    dt_grid = 0:40:2 us        # start:stop:step, stop inclusive
    u_min_grid = 2800, 100, 10, 1, 0.4 uK
    n_sequences = 100
    seed = 1

Every dimensioned key must carry a unit suffix. Trap depths and energies are
written as temperatures (E / k_B).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import constants as C
from ..trap import TrapConfig


class ConfigError(ValueError):
    """Malformed configuration text or value."""


SEQUENCES = ("release_recapture", "spectroscopy", "truncate_then_rr", "adiabatic_rr")

_UNITS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "nK": 1e-9},
    "mass": {"kg": 1.0, "amu": 1.66053906660e-27},
    "acceleration": {"m/s2": 1.0, "m/s^2": 1.0},
    "temperature/power": {f"{a}/{b}": va / vb
                          for a, va in {"K": 1.0, "mK": 1e-3, "uK": 1e-6}.items()
                          for b, vb in {"W": 1.0, "mW": 1e-3}.items()},
}

# key -> (dimension or None for dimensionless, kind)
_KEYS = {
    "power": ("power", "scalar"),
    "waist": ("length", "scalar"),
    "wavelength": ("length", "scalar"),
    "depth_per_power": ("temperature/power", "scalar"),
    "atom_mass": ("mass", "scalar"),
    "gravity": ("acceleration", "scalar"),
    "gravity_axis": (None, "str"),
    "sequence": (None, "str"),
    "temperature": ("temperature", "scalar"),
    "u_initial": ("temperature", "scalar"),
    "dt_grid": ("time", "grid"),
    "u_min_grid": ("temperature", "grid"),
    "u_ratio_grid": (None, "grid"),
    "n_sequences": (None, "int"),
    "n_traj": (None, "int"),
    "n_bins": (None, "int"),
    "scale": (None, "scalar"),
    "seed": (None, "int"),
    "workers": (None, "int"),
    "output": (None, "str"),
    "recoil_wavelength": ("length", "scalar"),
}

HOT_DT_GRID = tuple(np.arange(0, 21) * 2e-6)
COLD_DT_GRID = tuple(np.arange(0, 21) * 6e-6)
DEFAULT_U_RATIOS = tuple(np.geomspace(1e-4, 1.0, 41))


@dataclass(frozen=True)
class ExperimentConfig:
    trap: TrapConfig = field(default_factory=TrapConfig)
    sequence: str = "release_recapture"
    temperature: float = 33e-6  # K
    u_initial: float | None = None  # J; defaults to the depth at trap.power
    dt_grid: tuple[float, ...] | None = None  # s
    u_min_grid: tuple[float, ...] = ()  # J
    u_ratio_grid: tuple[float, ...] = DEFAULT_U_RATIOS
    n_sequences: int = 100
    n_traj: int = 10_000
    n_bins: int = 10
    scale: float = 0.95
    seed: int = 0
    workers: int = 1
    output: str | None = None
    recoil_wavelength: float = 780e-9

    def __post_init__(self):
        if self.sequence not in SEQUENCES:
            raise ConfigError(f"unknown sequence {self.sequence!r}; expected one of {SEQUENCES}")
        if self.n_sequences < 1 or self.n_traj < 1 or self.n_bins < 1:
            raise ConfigError("n_sequences, n_traj and n_bins must be >= 1")
        if not 0 < self.scale <= 1:
            raise ConfigError("scale must lie in (0, 1]")
        if not self.temperature > 0:
            raise ConfigError("temperature must be > 0")
        for name in ("dt_grid", "u_min_grid", "u_ratio_grid"):
            grid = getattr(self, name)
            if grid is None:
                continue
            arr = np.asarray(grid, dtype=float)
            if name != "u_min_grid" and arr.size == 0:
                raise ConfigError(f"{name} must be non-empty")
            if np.any(np.diff(arr) <= 0):
                raise ConfigError(f"{name} must be sorted and strictly increasing")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def depth_initial(self) -> float:
        return self.trap.u0 if self.u_initial is None else self.u_initial

    def release_times(self) -> tuple[float, ...]:
        if self.dt_grid is not None:
            return tuple(self.dt_grid)
        return HOT_DT_GRID if self.temperature >= 100e-6 else COLD_DT_GRID

    def canonical(self) -> dict:
        """Resolved settings that determine outputs (no paths, no worker count)."""
        d = asdict(self)
        d.pop("output")
        d.pop("workers")
        d["dt_grid"] = list(self.release_times())
        d["u_initial"] = self.depth_initial
        for k in ("u_min_grid", "u_ratio_grid"):
            d[k] = list(d[k])
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def output_dir(self) -> Path:
        if self.output:
            return Path(self.output)
        return Path(os.environ.get("TWEEZER_OUTPUT_DIR", "."))


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def _unit_scale(dim: str, unit: str, key: str) -> float:
    table = _UNITS[dim]
    if unit not in table:
        raise ConfigError(f"{key}: unit {unit!r} is not a {dim} unit ({', '.join(table)})")
    return table[unit]


def _split_unit(text: str, key: str, dim: str | None) -> tuple[str, float]:
    text = text.strip()
    if dim is None:
        return text, 1.0
    m = re.fullmatch(rf"(.*?)\s*([A-Za-z][A-Za-z/^0-9]*)", text)
    if not m or not re.search(r"\d", m.group(1)):
        raise ConfigError(f"{key}: missing unit suffix in {text!r}")
    return m.group(1), _unit_scale(dim, m.group(2), key)


def _parse_number(s: str, key: str) -> float:
    s = s.strip()
    if not re.fullmatch(_NUM, s):
        raise ConfigError(f"{key}: not a number: {s!r}")
    return float(s)


def _parse_grid(body: str, key: str) -> list[float]:
    body = body.strip()
    if ":" in body:
        parts = body.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: range must be start:stop:step")
        start, stop, step = (_parse_number(p, key) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"{key}: invalid range")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    items = [p for p in body.split(",") if p.strip()]
    if not items:
        raise ConfigError(f"{key}: empty grid")
    return [_parse_number(p, key) for p in items]


def parse_value(key: str, raw: str):
    if key not in _KEYS:
        raise ConfigError(f"unknown key {key!r}")
    dim, kind = _KEYS[key]
    if kind == "str":
        return raw.strip()
    if kind == "int":
        try:
            return int(raw.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    body, scale = _split_unit(raw, key, dim)
    if kind == "scalar":
        return _parse_number(body, key) * scale
    return [v * scale for v in _parse_grid(body, key)]


def parse_pairs(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        out[key] = parse_value(key, raw)
    return out


_TRAP_KEYS = {"power", "waist", "wavelength", "depth_per_power", "atom_mass",
              "gravity", "gravity_axis"}


def config_from_values(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    trap_kw, exp_kw = {}, {}
    for k, v in values.items():
        if k in _TRAP_KEYS:
            if k == "depth_per_power":
                v = v * C.k_B
            trap_kw[k] = v
        elif k in ("u_initial",):
            exp_kw[k] = v * C.k_B
        elif k == "u_min_grid":
            exp_kw[k] = tuple(sorted(x * C.k_B for x in v))
        elif k in ("dt_grid", "u_ratio_grid"):
            exp_kw[k] = tuple(sorted(v))
        else:
            exp_kw[k] = v
    try:
        trap = replace(base.trap, **trap_kw)
        return replace(base, trap=trap, **exp_kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    values = parse_pairs(text)
    values.update(overrides or {})
    return config_from_values(values)


def load_config(path: str | os.PathLike | None, overrides: list[str] = ()) -> ExperimentConfig:
    """Read a config file (or defaults when `path` is None) plus ``key=value`` overrides."""
    text = "" if path is None else Path(path).read_text()
    extra = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        k, v = item.split("=", 1)
        extra[k.strip()] = parse_value(k.strip(), v)
    return parse_config(text, extra)
