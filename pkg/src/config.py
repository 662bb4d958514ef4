"""
Run configuration for pdpolar.
JSON config files validated by pydantic models; process-level settings
come from environment variables.
"""

import os
import json
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from channel_param import ChannelModel
from polarize import K_GUARD, MC_SAMPLE_FLOOR
from ber import ORACLE_SAMPLE_FLOOR
from logger import get_logger

log = get_logger("config")

WORKERS = int(os.getenv("PDPOLAR_WORKERS", "4"))

DEFAULT_K_LIST = [5, 10, 15, 20]
DEFAULT_RATE_TARGETS = [0.05, 0.1, 0.2, 0.3, 0.4]


class ConfigError(ValueError):
    """Raised for unreadable, malformed or out-of-range configuration."""


def _check_k(k):
    if k > K_GUARD:
        raise ValueError(f"k exceeds guard {K_GUARD}")
    if k < 1:
        raise ValueError("k must be >= 1")
    return k


class GeometryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int
    beta: float = 0.3

    @field_validator("k")
    @classmethod
    def _k_guard(cls, k):
        return _check_k(k)

    @field_validator("beta")
    @classmethod
    def _beta_range(cls, beta):
        if not 0.0 < beta < 0.5:
            raise ValueError("beta out of range (0, 0.5)")
        return beta


class McConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    samples: int = Field(ORACLE_SAMPLE_FLOOR, ge=ORACLE_SAMPLE_FLOOR)
    seed: Optional[int] = None
    density_evolution: bool = False
    de_samples: int = Field(20_000, ge=MC_SAMPLE_FLOOR)

    @model_validator(mode="after")
    def _seed_required(self):
        if (self.enabled or self.density_evolution) and self.seed is None:
            raise ValueError("seed is required when Monte Carlo is enabled")
        return self


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k_list: list[int] = Field(default_factory=lambda: list(DEFAULT_K_LIST))
    param_grid: list[dict] = Field(default_factory=list)
    rate_targets: list[float] = Field(default_factory=lambda: list(DEFAULT_RATE_TARGETS))

    @field_validator("k_list")
    @classmethod
    def _k_guard(cls, k_list):
        return [_check_k(k) for k in k_list]

    @field_validator("rate_targets")
    @classmethod
    def _rates_in_range(cls, rates):
        if any(not 0.0 < r <= 1.0 for r in rates):
            raise ValueError("rate targets must lie in (0, 1]")
        return rates


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = "out"
    timing: bool = True  # False writes ms=0 so CSVs are byte-reproducible


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    channel: ChannelModel
    geometry: GeometryConfig
    eta: float
    mc: McConfig = Field(default_factory=McConfig)
    sweep: Optional[SweepConfig] = None
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("eta")
    @classmethod
    def _eta_range(cls, eta):
        if not 0.0 < eta < 1.0:
            raise ValueError("invalid threshold: eta must lie in (0, 1)")
        return eta

    @model_validator(mode="after")
    def _grid_cells_valid(self):
        if self.sweep is not None:
            for i, _ in enumerate(self.sweep.param_grid):
                try:
                    self.grid_channel(i)
                except ValidationError as e:
                    raise ValueError(f"sweep.param_grid.{i}: {_first_message(e)}") from None
        return self

    def grid_channel(self, index) -> ChannelModel:
        """Sweep cell channel: grid entry merged over the base channel."""
        merged = {**self.channel.model_dump(), **self.sweep.param_grid[index]}
        return ChannelModel.model_validate(merged)


def _first_message(error: ValidationError):
    first = error.errors()[0]
    path = ".".join(str(part) for part in first["loc"])
    msg = first["msg"].removeprefix("Value error, ")
    return f"{path}: {msg}" if path else msg


def load_config(path) -> RunConfig:
    """
    Read and validate a JSON run config.
    Raises ConfigError with line/column on parse errors and the dotted field
    path on validation errors.
    """
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from e

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_first_message(e)}") from e

    log.info(f"Loaded config {path}: family={config.channel.family}, k={config.geometry.k}, "
             f"sweep={'yes' if config.sweep else 'no'}")
    return config
