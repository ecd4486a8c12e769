"""
Configuration Module
Defaults, experiment config files (YAML/JSON) and their validated schema
"""

import json
import math
import os
from pathlib import Path
from typing import Annotated, Any, Literal

import yaml
from pydantic import BaseModel, BeforeValidator, Field, ValidationError, model_validator

from .error_handler import ConfigurationError

# Monte Carlo
CHUNK_ELEMENTS = 1 << 20
DEFAULT_TRIALS = 100_000
HITS_PER_TARGET = 100
LOW_CONFIDENCE_HITS = 10
CONFIDENCE_LEVEL = 0.95
RELATIVE_CI_LIMIT = 0.3
MIN_FIT_POINTS = 3
FIT_SPAN_DB = 10.0

# Default Rician branch (K = 1)
DEFAULT_RICIAN_S = 1.0
DEFAULT_RICIAN_B = 0.5

# Radiation pattern
PATTERN_POINTS = 2048
PATTERN_FLOOR_DB = -120.0

# Laplace series: default truncation N = 2M + SERIES_EXTRA_TERMS
SERIES_EXTRA_TERMS = 8
SERIES_PRECISION_DPS = 40
VALIDITY_RATIO = 0.1

ENV_WORKERS = "RISALIGN_WORKERS"

# Fields that never change numerical results and stay out of artifact headers
NON_SEMANTIC_FIELDS = {"output", "density_output", "workers", "log_level", "log_dir"}

SEEDED_COMMANDS = {"outage", "sweep-angle", "moments"}


def default_workers() -> int:
    value = os.environ.get(ENV_WORKERS)
    if value:
        try:
            return max(1, int(value))
        except ValueError as e:
            raise ConfigurationError(f"{ENV_WORKERS} must be an integer, got {value!r}") from e
    return min(8, os.cpu_count() or 1)


def _count(value: Any) -> Any:
    """Accept 1e6-style counts from flags and YAML (which reads 1e6 as a string)"""
    if isinstance(value, str):
        value = float(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"count must be a whole number, got {value}")
        return int(value)
    return value


Count = Annotated[int, BeforeValidator(_count)]


class DistributionConfig(BaseModel):
    kind: Literal["rayleigh", "rician", "degenerate"] = "rayleigh"
    b: float | None = Field(default=None, gt=0)
    s: float = Field(default=DEFAULT_RICIAN_S, ge=0)
    c: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def default_scale(self) -> "DistributionConfig":
        if self.b is None:
            self.b = DEFAULT_RICIAN_B if self.kind == "rician" else 1.0
        return self


class AlignmentConfig(BaseModel):
    kind: Literal["perfect", "coherent", "random", "destructive"] = "perfect"
    theta0: float = 0.0
    half_width: float | None = Field(default=None, ge=0)
    level: int | None = Field(default=None, ge=1)
    convention: Literal["section2", "appendixA"] | None = None

    @model_validator(mode="after")
    def check_coherent_window(self) -> "AlignmentConfig":
        if self.kind == "coherent" and self.half_width is None:
            if self.level is None or self.convention is None:
                raise ValueError("coherent alignment needs half_width, or level together with convention")
        return self


class GeometryConfig(BaseModel):
    M: int = Field(default=8, ge=1)
    dx: float = Field(default=0.5, gt=0)
    u0: float = Field(default=0.0, ge=-1, le=1)


class GridConfig(BaseModel):
    gamma_0: float = Field(default=1.0, gt=0)
    start_db: float = 0.0
    stop_db: float = 30.0
    step_db: float = Field(default=2.0, gt=0)
    values_db: list[float] | None = None

    def points_db(self) -> list[float]:
        if self.values_db is not None:
            return list(self.values_db)
        count = int(round((self.stop_db - self.start_db) / self.step_db)) + 1
        return [self.start_db + i * self.step_db for i in range(count)]


class SeriesConfig(BaseModel):
    order: int | None = Field(default=None, ge=2)
    x_max: float = Field(default=0.5, gt=0)
    bins: int = Field(default=20, ge=10)
    trials: Count = Field(default=0, ge=0)
    conditional: bool = True


class PatternConfig(BaseModel):
    points: int = Field(default=PATTERN_POINTS, ge=2)
    woodward_band: tuple[float, float] | None = None


class UserConfig(BaseModel):
    rate: float = Field(gt=0)
    channel: float | None = Field(default=None, ge=0)
    distance: float | None = Field(default=None, gt=0)
    angle_deg: float | None = None


class MultiAccessConfig(BaseModel):
    scheme: Literal["noma_static", "tdma_static", "fdma_static", "noma_dynamic", "tdma_dynamic", "all"] = "all"
    sigma_sq: float = Field(default=1.0, gt=0)
    p_rad: float | None = Field(default=None, gt=0)
    beta: float = Field(default=2.0, gt=0)
    users: list[UserConfig] = Field(default_factory=list)
    slots: list[list[float]] | None = None

    @model_validator(mode="after")
    def check_users(self) -> "MultiAccessConfig":
        for index, user in enumerate(self.users):
            if user.channel is None and (user.distance is None or user.angle_deg is None):
                raise ValueError(f"user {index} needs a channel, or a distance and an angle")
        if self.slots is not None:
            K = len(self.users)
            if len(self.slots) != K or any(len(row) != K for row in self.slots):
                raise ValueError(f"slots must be a {K}x{K} matrix of channel magnitudes")
        return self


class SpacingConfig(BaseModel):
    M: list[int] = Field(default_factory=lambda: [5])
    d_ratio: float = Field(default=2.0, gt=0)
    beta: float = Field(default=2.0, gt=0)
    table: bool = False


class ExperimentConfig(BaseModel):
    """One CLI experiment, validated before anything runs"""

    command: Literal["outage", "sweep-angle", "pattern", "series", "moments", "ma-budget", "spacing"]
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    distribution: DistributionConfig = Field(default_factory=DistributionConfig)
    alignment: AlignmentConfig = Field(default_factory=AlignmentConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    series: SeriesConfig = Field(default_factory=SeriesConfig)
    pattern: PatternConfig = Field(default_factory=PatternConfig)
    multi_access: MultiAccessConfig = Field(default_factory=MultiAccessConfig)
    spacing: SpacingConfig = Field(default_factory=SpacingConfig)
    trials: Count = Field(default=DEFAULT_TRIALS, ge=1)
    target_p_out: float | None = Field(default=None, gt=0, lt=1)
    seed: int | None = Field(default=None, ge=0, lt=2**64)
    conditional: bool = False
    angles_deg: list[float] = Field(default_factory=lambda: [0.0, 15.0, 30.0])
    output: str | None = None
    density_output: str | None = None
    workers: int | None = Field(default=None, ge=1)
    log_level: str = "INFO"
    log_dir: str | None = None

    @model_validator(mode="before")
    @classmethod
    def trials_from_target(cls, data: Any) -> Any:
        """Without explicit trials, draw enough to see about 100 outages at target_p_out"""
        if isinstance(data, dict) and data.get("trials") is None and data.get("target_p_out") is not None:
            try:
                target = float(data["target_p_out"])
            except (TypeError, ValueError):
                return data
            if 0 < target < 1:
                data = {**data, "trials": math.ceil(round(HITS_PER_TARGET / target, 6))}
        return data

    @model_validator(mode="after")
    def check_seed(self) -> "ExperimentConfig":
        needs_seed = self.command in SEEDED_COMMANDS or (self.command == "series" and self.series.trials > 0)
        if needs_seed and self.seed is None:
            raise ValueError(f"'{self.command}' draws random numbers and needs an explicit seed")
        if self.command == "series" and self.series.trials > 0 and self.density_output is None:
            raise ValueError("series density check needs density_output")
        return self

    def echo(self) -> dict[str, Any]:
        """Config as echoed into artifact headers"""
        return self.model_dump(mode="json", exclude=NON_SEMANTIC_FIELDS)


def load_config_file(path: str | Path) -> dict[str, Any]:
    """
    Read a YAML or JSON experiment file

    Args:
        path: File path; .yaml/.yml read with yaml.safe_load, .json with json.load

    Returns:
        Parsed mapping
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".yaml", ".yml", ".json"):
        raise ConfigurationError(f"unsupported config format '{suffix}', use .yaml, .yml or .json")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f) if suffix == ".json" else yaml.safe_load(f)
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot parse config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must contain a mapping at top level")
    return data


def merge_overrides(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Deep merge; override values win"""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_overrides(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_config(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        problems = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        message = "invalid experiment config: " + "; ".join(problems)
        raise ConfigurationError(message, details={"errors": problems}) from e
