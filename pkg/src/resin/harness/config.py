"""Experiment configurations, YAML loading and desk-scale overrides.

Every field defaults to the value used in the original experiments, so an
empty config file reproduces them. A config file is a YAML mapping of field
overrides, either flat or nested under the experiment name.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from ..errors import ConfigError

EXPERIMENTS = (
    "reconstruct",
    "replicate",
    "filter",
    "sweep_relu",
    "sweep_rank",
    "filter_heavytail",
)


def _seeds(n: int = 10) -> list:
    return list(range(n))


@dataclass
class BaseConfig:
    seeds: list = field(default_factory=_seeds)

    def validate(self):
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative integers")
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name.startswith("n_") or f.name in ("steps", "train", "test", "warmup", "M"):
                if not isinstance(value, int) or value < 1:
                    raise ConfigError(f"{f.name} must be a positive integer, got {value!r}")
            if f.name.endswith("_grid") or f.name in ("variances", "alphas", "nus"):
                if len(value) == 0:
                    raise ConfigError(f"{f.name} must be non-empty")
        if getattr(self, "input_variance", 1.0) <= 0:
            raise ConfigError("input_variance must be positive")
        if getattr(self, "spectral_radius", 1.0) <= 0:
            raise ConfigError("spectral_radius must be positive")
        if not 0.0 <= getattr(self, "alpha", 0.0) <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if getattr(self, "M", 2) < 2:
            raise ConfigError("ensemble size M must be at least 2")


@dataclass
class ReconstructConfig(BaseConfig):
    n_r: int = 50
    steps: int = 1200
    input_variance: float = 0.02
    spectral_radius: float = 0.9
    final_window: int = 400
    switch_step: int = 400


@dataclass
class ReplicateConfig(BaseConfig):
    n_r: int = 500
    train: int = 5000
    test: int = 2000
    # Standard-deviation reading of N(0, 0.02); keeps raw Lorenz inputs
    # away from tanh saturation.
    input_variance: float = 4e-4
    spectral_radius: float = 1.2
    input_scale: float = 1.0
    dt: float = 0.02
    box_factor: float = 1.5
    moment_tol: float = 0.25
    write_orbits: bool = True


@dataclass
class FilterConfig(BaseConfig):
    n_r: int = 30
    train: int = 5000
    test: int = 3000
    period: float = 100.0
    input_variance: float = 0.02
    spectral_radius: float = 0.9
    train_noise: float = 0.01
    sigma2_grid: list = field(default_factory=lambda: np.logspace(-2, 1, 10).tolist())
    M: int = 300
    alpha: float = 0.01
    include_fixed: bool = True
    init_std: float = 1.0
    prior_rtol: Optional[float] = 1e-2


@dataclass
class SweepReluConfig(BaseConfig):
    n_r: int = 50
    steps: int = 1200
    period: float = 50.0
    variances: list = field(default_factory=lambda: [0.01, 1.0, 2.0])
    alphas: list = field(default_factory=lambda: [-0.01, -0.03, -0.1, -0.3, -1.0])
    spectral_radius: float = 0.9
    form: str = "fullrank"

    def validate(self):
        super().validate()
        if any(v <= 0 for v in self.variances):
            raise ConfigError("variances must be positive")
        if any(a >= 0 for a in self.alphas):
            raise ConfigError("alphas must be strictly negative")
        if self.form not in ("fullrank", "general"):
            raise ConfigError("form must be 'fullrank' or 'general'")


@dataclass
class SweepRankConfig(BaseConfig):
    n_r: int = 100
    warmup: int = 5000
    train: int = 5000
    period: float = 50.0
    input_variance: float = 0.02
    spectral_radius: float = 0.9
    noise_grid: list = field(default_factory=lambda: np.logspace(-15, 0, 20).tolist())


@dataclass
class HeavytailConfig(BaseConfig):
    n_r: int = 50
    train: int = 5000
    test: int = 3000
    period: float = 100.0
    input_variance: float = 0.02
    spectral_radius: float = 0.9
    train_noise: float = 0.01
    noise_scale: float = 1.0
    nus: list = field(default_factory=lambda: [1.0, 2.0, 5.0, math.inf])
    M: int = 500
    alpha: float = 0.01
    init_std: float = 1.0
    prior_rtol: Optional[float] = 1e-2

    def validate(self):
        super().validate()
        if any(not nu > 0 for nu in self.nus):
            raise ConfigError("nus must be positive")


CONFIG_TYPES = {
    "reconstruct": ReconstructConfig,
    "replicate": ReplicateConfig,
    "filter": FilterConfig,
    "sweep_relu": SweepReluConfig,
    "sweep_rank": SweepRankConfig,
    "filter_heavytail": HeavytailConfig,
}

# Desk-scale overrides: n_r 500 -> 100, T 5000 -> 2000, M 300 -> 100.
SMALL_SCALE = {
    "reconstruct": {},
    "replicate": {"n_r": 100, "train": 2000},
    "filter": {"train": 2000, "M": 100},
    "sweep_relu": {},
    "sweep_rank": {"warmup": 2000, "train": 2000},
    "filter_heavytail": {"train": 2000, "M": 100},
}


def _coerce(name: str, value):
    # YAML has no literal for infinity inside plain lists written as strings.
    if name == "nus":
        return [math.inf if str(v).lower() in ("inf", "infinity", ".inf") else float(v) for v in value]
    return value


def make_config(
    experiment: str,
    overrides: Optional[dict] = None,
    scale: str = "paper",
    seed_count: Optional[int] = None,
):
    """Build a validated config for ``experiment``.

    Precedence, lowest first: defaults, desk-scale overrides, ``overrides``,
    ``seed_count``.
    """
    if experiment not in CONFIG_TYPES:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if scale not in ("paper", "small"):
        raise ConfigError(f"scale must be 'paper' or 'small', got {scale!r}")
    cls = CONFIG_TYPES[experiment]
    values = dict(SMALL_SCALE[experiment]) if scale == "small" else {}
    overrides = dict(overrides or {})
    if experiment in overrides and isinstance(overrides[experiment], dict):
        nested = overrides.pop(experiment)
        overrides = {k: v for k, v in overrides.items() if k not in CONFIG_TYPES}
        overrides.update(nested)
    else:
        overrides = {k: v for k, v in overrides.items() if k not in CONFIG_TYPES}
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigError(f"unknown {experiment} config keys: {', '.join(unknown)}")
    values.update({k: _coerce(k, v) for k, v in overrides.items()})
    if seed_count is not None:
        if seed_count < 1:
            raise ConfigError("seed count must be at least 1")
        values["seeds"] = list(range(seed_count))
    try:
        cfg = cls(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        cfg.validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config_file(path) -> dict:
    """Read a YAML mapping from ``path``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return data
