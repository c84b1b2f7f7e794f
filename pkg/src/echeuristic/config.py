"""Experiment configuration files.

Grammar: INI-style sections holding ``key = value`` lines; ``#`` and ``;``
start comments.  Lists are comma- or whitespace-separated reals.  Every key
belongs to exactly one section and unknown sections or keys are errors::

    [covariance]
    family = squared_exponential      ; squared_exponential | cosine_mixture | latitude_circle
    params = 1.0                      ; flat list of reals
    normalize = true

    [space]
    shape = interval                  ; interval | box | convex
    dims = 5.0                        ; T | side lengths | area, perimeter

    [grid]
    n_grid = 4096                     ; per axis
    pad_factor = 4

    [mc]
    n_paths = 200000
    seed = 12345
    u_grid = 1.5, 2.0, 2.5
    workers = 1

    [fit]
    min_signal_k = 3
    tol_exp = 0.15
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .covariance import CovarianceModel, from_spec
from .ec_heuristic import ParameterSpace, Shape

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "parse_floats"]

MIN_PATHS = 10_000

_SCHEMA = {
    "covariance": {"family": str, "params": "floats", "normalize": bool},
    "space": {"shape": str, "dims": "floats"},
    "grid": {"n_grid": int, "pad_factor": int},
    "mc": {"n_paths": int, "seed": int, "u_grid": "floats", "workers": int},
    "fit": {"min_signal_k": float, "tol_exp": float},
}
_REQUIRED = {("covariance", "family"), ("covariance", "params"), ("space", "shape"), ("space", "dims"), ("mc", "u_grid")}


class ConfigError(ValueError):
    pass


def parse_floats(text: str) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"not a list of reals: {text!r}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    params: tuple[float, ...]
    shape: str
    dims: tuple[float, ...]
    u_grid: tuple[float, ...]
    normalize: bool = True
    n_paths: int = 100_000
    n_grid: int = 4096
    pad_factor: int = 4
    master_seed: int = 0
    min_signal_k: float = 3.0
    tol_exp: float = 0.15
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(map(float, self.params)))
        object.__setattr__(self, "dims", tuple(map(float, self.dims)))
        object.__setattr__(self, "u_grid", tuple(map(float, self.u_grid)))
        if not self.u_grid:
            raise ConfigError("u_grid is empty")
        if any(b <= a for a, b in zip(self.u_grid, self.u_grid[1:])):
            raise ConfigError("u_grid must be strictly ascending")
        if any(u <= 0 for u in self.u_grid):
            raise ConfigError("u_grid levels must be positive")
        if self.n_paths < MIN_PATHS:
            raise ConfigError(f"n_paths must be >= {MIN_PATHS}")
        if self.tol_exp < 0 or self.min_signal_k <= 0:
            raise ConfigError("tol_exp must be >= 0 and min_signal_k > 0")
        if self.master_seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        try:
            self.space()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def covariance(self) -> CovarianceModel:
        try:
            return from_spec(self.family, self.params, self.normalize)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def space(self) -> ParameterSpace:
        try:
            shape = Shape(self.shape)
        except ValueError:
            raise ConfigError(f"unknown space shape {self.shape!r}") from None
        lam = self.covariance().lambda2
        return ParameterSpace(shape, self.dims, lam)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind == "floats":
            return parse_floats(raw)
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw.replace("_", ""))
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[(section, key)] = _convert(section, key, raw, _SCHEMA[section][key])
    missing = sorted(f"[{s}] {k}" for s, k in _REQUIRED - values.keys())
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    kwargs = {("master_seed" if sk == ("mc", "seed") else sk[1]): v for sk, v in values.items()}
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
