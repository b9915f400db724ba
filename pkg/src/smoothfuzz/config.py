"""smoothfuzz config loading: TOML files validated on load."""

import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from smoothfuzz._logging import validate_log_level
from smoothfuzz.exceptions import ConfigError

_EXPERIMENT_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")

OUTPUT_DIR_ENV = "SMOOTHFUZZ_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "smoothfuzz-out"


# ---------------------------------------------------------------------------
# Config models
# ---------------------------------------------------------------------------


class StepSizes(BaseModel):
    """Gradient step lengths for centers, spreads and consequents."""

    model_config = ConfigDict(frozen=True)

    alpha_c: float = Field(default=0.01, ge=0.0)
    alpha_delta: float = Field(default=0.01, ge=0.0)
    alpha_d: float = Field(default=0.01, ge=0.0)


class TrainConfig(StepSizes):
    """Batch identification settings, in normalized units.

    ``horizon`` is the window length T of the error function; ``epsilon`` is
    the per-sample accuracy below which no update is made.
    """

    epsilon: float = Field(default=1e-3, gt=0.0)
    horizon: int = Field(default=50, ge=1)
    max_epochs: int = Field(default=500, ge=1)
    restarts: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _positive_steps(self) -> "TrainConfig":
        if min(self.alpha_c, self.alpha_delta, self.alpha_d) <= 0.0:
            raise ValueError("training step sizes must be > 0")
        return self


class AdaptConfig(StepSizes):
    """Online self-learning settings.

    ``horizon`` caps the number of processed samples (None: whole stream).
    Zero step sizes are allowed and freeze the parameters.
    """

    epsilon: float = Field(default=1e-3, gt=0.0)
    horizon: int | None = Field(default=None, ge=0)
    rms_window: int = Field(default=50, ge=1)


class LoggingConfig(BaseModel):
    level: str = "INFO"

    @field_validator("level")
    @classmethod
    def _known_level(cls, v: str) -> str:
        validate_log_level(v)
        return v.upper()


class TracingConfig(BaseModel):
    exporter: Literal["none", "console", "otlp"] = "none"
    endpoint: str = "http://localhost:4317"
    service_name: str = "smoothfuzz"
    sample_rate: float = Field(default=1.0, ge=0.0, le=1.0)


class OutputConfig(BaseModel):
    directory: str = ""


class GlobalConfig(BaseModel):
    """Loaded config: packaged defaults with any user file merged on top."""

    train: TrainConfig = TrainConfig()
    adapt: AdaptConfig = AdaptConfig()
    logging: LoggingConfig = LoggingConfig()
    tracing: TracingConfig = TracingConfig()
    output: OutputConfig = OutputConfig()


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------


def _get_config_dir() -> Path:
    """Return the directory containing packaged config files."""
    return Path(__file__).parent


def _load_toml_file(path: Path, context: str) -> dict[str, Any]:
    """Load and parse a TOML file with consistent error handling.

    Raises:
        ConfigError: On missing file or malformed TOML.
    """
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"{context} not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Failed to parse {context}: {e}")


def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _validate_experiment_name(name: str) -> None:
    """Restrict experiment names to safe identifiers (no path traversal).

    Raises:
        ConfigError: On invalid name.
    """
    if not name:
        raise ConfigError("Experiment name cannot be empty")
    if len(name) > 64:
        raise ConfigError("Experiment name too long (max 64 characters)")
    if not _EXPERIMENT_NAME_RE.match(name):
        raise ConfigError(
            f"Invalid experiment name '{name}'. "
            "Must start with a letter and contain only lowercase letters, "
            "numbers, and underscores."
        )


# ---------------------------------------------------------------------------
# Loader functions
# ---------------------------------------------------------------------------


def load_config_data(path: Path | str | None = None) -> dict[str, Any]:
    """Packaged defaults deep-merged with the TOML file at *path* (if any)."""
    data = _load_toml_file(_get_config_dir() / "config.toml", "global config")
    if path is not None:
        data = _deep_merge(data, _load_toml_file(Path(path), f"config file '{path}'"))
    return data


def build_global_config(data: dict[str, Any]) -> GlobalConfig:
    """Validate merged config data.

    An adapt section without ``epsilon`` inherits the training epsilon.

    Raises:
        ConfigError: On any validation failure.
    """
    try:
        train = TrainConfig(**data.get("train", {}))
        adapt_data = dict(data.get("adapt", {}))
        adapt_data.setdefault("epsilon", train.epsilon)
        return GlobalConfig(
            train=train,
            adapt=AdaptConfig(**adapt_data),
            logging=LoggingConfig(**data.get("logging", {})),
            tracing=TracingConfig(**data.get("tracing", {})),
            output=OutputConfig(**data.get("output", {})),
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid config: {e}")
    except ConfigError as e:
        raise ConfigError(f"Invalid config: {e}")


def load_global_config(path: Path | str | None = None) -> GlobalConfig:
    """Load and validate the global config (packaged defaults + user file).

    Raises:
        ConfigError: On any failure.
    """
    return build_global_config(load_config_data(path))


def load_experiment_data(name: str) -> dict[str, Any]:
    """Load a packaged experiment TOML by name (e.g. ``"mackey_glass"``).

    Raises:
        ConfigError: On an invalid name, missing file or malformed TOML.
    """
    _validate_experiment_name(name)
    path = _get_config_dir() / "experiments" / f"{name}.toml"
    return _load_toml_file(path, f"experiment config '{name}'")


def resolve_output_dir(flag: str | None, config: GlobalConfig) -> Path:
    """Output directory precedence: flag > config file > env var > default."""
    if flag:
        return Path(flag)
    if config.output.directory:
        return Path(config.output.directory)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(DEFAULT_OUTPUT_DIR)
