"""Experiment configuration: a flat YAML mapping with a fixed key set."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from irsim.life import LifeParams, p_of_lambda
from irsim.mlife import ControlParams

MODELS = ("life", "mlife")
METRICS = ("density", "cluster_stats", "rejected_rate", "changed_cells")
OUTPUT_ENV = "IRSIM_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    width: int = 100
    height: int = 100
    init_density: float | None = None
    seed: int = 0
    replications: int = 10
    t_final: int = 1000
    p: float | None = None
    lambda_plus: float | None = None
    rho_plus: float | None = None
    k_p: float | None = None
    region_size: int = 10
    meso_dt: int = 1
    metrics: tuple | None = None
    convergence_cap: int | None = 20000
    stop_on_steady: bool = True
    output: str | None = None
    dump_grids: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.metrics is None:
            # every metric the grid supports
            tiled = (isinstance(self.region_size, int) and self.region_size > 0
                     and self.width % self.region_size == 0 and self.height % self.region_size == 0)
            chosen = [m for m in METRICS if m != "cluster_stats" or tiled]
            object.__setattr__(self, "metrics", tuple(chosen))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        for name in ("width", "height", "replications", "region_size", "meso_dt", "workers"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not isinstance(self.t_final, int) or self.t_final < 0:
            raise ConfigError("t_final must be a non-negative integer")
        if self.convergence_cap is not None and (not isinstance(self.convergence_cap, int) or self.convergence_cap < 1):
            raise ConfigError("convergence_cap must be a positive integer or null")
        if self.init_density is not None and not 0.0 <= self.init_density <= 1.0:
            raise ConfigError("init_density must lie in [0, 1]")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}; choose from {METRICS}")
        if self.model == "life":
            if (self.p is None) == (self.lambda_plus is None):
                raise ConfigError("life needs exactly one of p / lambda_plus")
            if self.rho_plus is not None or self.k_p is not None:
                raise ConfigError("rho_plus / k_p only apply to mlife")
            try:
                self.life_params()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        else:
            if self.p is not None or self.lambda_plus is not None:
                raise ConfigError("p / lambda_plus only apply to life")
            if self.rho_plus is None:
                raise ConfigError("mlife needs rho_plus")
            try:
                self.control_params()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if self.init_density is None and not 2 * self.rho_plus <= 1.0:
                raise ConfigError("default init_density 2*rho_plus exceeds 1")
        if (self.model == "mlife" or "cluster_stats" in self.metrics) and (
                self.width % self.region_size or self.height % self.region_size):
            raise ConfigError(f"{self.width}x{self.height} is not tiled by {self.region_size}x{self.region_size} regions")

    def life_params(self) -> LifeParams:
        if self.p is not None:
            return LifeParams(float(self.p))
        return LifeParams(p_of_lambda(float(self.lambda_plus), saturate=True))

    def control_params(self) -> ControlParams:
        return ControlParams(float(self.rho_plus), None if self.k_p is None else float(self.k_p))

    @property
    def initial_density(self) -> float:
        if self.init_density is not None:
            return self.init_density
        return 2 * self.rho_plus if self.model == "mlife" else 0.5

    @property
    def output_dir(self) -> Path:
        if self.output is not None:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_ENV, "runs"))

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        try:
            return replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_mapping(self) -> dict:
        d = asdict(self)
        d["metrics"] = list(self.metrics)
        return d

    @classmethod
    def from_mapping(cls, data) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "model" not in data:
            raise ConfigError("config needs a model key")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_mapping(data)
