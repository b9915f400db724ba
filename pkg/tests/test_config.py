"""Tests for smoothfuzz config loading."""

from pathlib import Path

import pytest

from smoothfuzz.config import (
    DEFAULT_OUTPUT_DIR,
    OUTPUT_DIR_ENV,
    AdaptConfig,
    GlobalConfig,
    TrainConfig,
    _deep_merge,
    _validate_experiment_name,
    build_global_config,
    load_experiment_data,
    load_global_config,
    resolve_output_dir,
)
from smoothfuzz.exceptions import ConfigError, SmoothFuzzError


def _write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "smoothfuzz.toml"
    path.write_text(text)
    return path


# --- Global config loading ---


def test_load_global_config_defaults():
    config = load_global_config()
    assert isinstance(config, GlobalConfig)
    assert config.train.horizon == 50
    assert config.train.epsilon == 1e-3
    assert config.train.restarts == 1
    assert config.adapt.rms_window == 50
    assert config.logging.level == "INFO"
    assert config.tracing.exporter == "none"


def test_adapt_epsilon_inherits_train_epsilon(tmp_path):
    path = _write_config(tmp_path, "[train]\nepsilon = 0.02\n")
    config = load_global_config(path)
    assert config.train.epsilon == 0.02
    assert config.adapt.epsilon == 0.02


def test_explicit_adapt_epsilon_wins(tmp_path):
    path = _write_config(tmp_path, "[train]\nepsilon = 0.02\n[adapt]\nepsilon = 0.5\n")
    assert load_global_config(path).adapt.epsilon == 0.5


def test_user_file_merges_over_defaults(tmp_path):
    path = _write_config(tmp_path, "[train]\nmax_epochs = 7\n")
    config = load_global_config(path)
    assert config.train.max_epochs == 7
    assert config.train.horizon == 50


def test_missing_user_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_global_config(tmp_path / "absent.toml")


def test_malformed_toml(tmp_path):
    path = _write_config(tmp_path, "[train\n")
    with pytest.raises(ConfigError, match="Failed to parse"):
        load_global_config(path)


def test_invalid_value_wrapped(tmp_path):
    path = _write_config(tmp_path, "[train]\nhorizon = 0\n")
    with pytest.raises(ConfigError, match="Invalid config"):
        load_global_config(path)


def test_invalid_log_level_wrapped():
    with pytest.raises(ConfigError, match="Invalid config"):
        build_global_config({"logging": {"level": "LOUD"}})


def test_config_error_is_smoothfuzz_error():
    assert issubclass(ConfigError, SmoothFuzzError)


# --- Step sizes ---


class TestStepSizes:
    def test_train_requires_positive_steps(self):
        with pytest.raises(ValueError, match="step sizes"):
            TrainConfig(alpha_c=0.0)

    def test_adapt_allows_zero_steps(self):
        config = AdaptConfig(alpha_c=0.0, alpha_delta=0.0, alpha_d=0.0)
        assert config.alpha_d == 0.0

    def test_negative_steps_rejected(self):
        with pytest.raises(ValueError):
            AdaptConfig(alpha_c=-0.1)

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValueError):
            TrainConfig(epsilon=0.0)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError, match="seed"):
            TrainConfig(seed=-1, restarts=2)

    def test_frozen(self):
        config = TrainConfig()
        with pytest.raises(Exception):
            config.horizon = 3


# --- Experiment files ---


class TestExperimentData:
    def test_packaged_experiments_load(self):
        for name in ("mackey_glass", "cstr"):
            data = load_experiment_data(name)
            assert data["plant"] == name

    def test_missing_experiment(self):
        with pytest.raises(ConfigError, match="not found"):
            load_experiment_data("no_such_plant")

    @pytest.mark.parametrize("name", ["", "../etc", "Upper", "1abc", "a" * 65])
    def test_unsafe_names_rejected(self, name):
        with pytest.raises(ConfigError):
            _validate_experiment_name(name)


# --- Helpers ---


def test_deep_merge_nested():
    merged = _deep_merge({"a": {"x": 1, "y": 2}, "b": 1}, {"a": {"y": 3}})
    assert merged == {"a": {"x": 1, "y": 3}, "b": 1}


class TestOutputDir:
    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, "/from/env")
        assert resolve_output_dir("out", GlobalConfig()) == Path("out")

    def test_config_before_env(self, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, "/from/env")
        config = build_global_config({"output": {"directory": "cfg"}})
        assert resolve_output_dir(None, config) == Path("cfg")

    def test_env_before_default(self, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, "/from/env")
        assert resolve_output_dir(None, GlobalConfig()) == Path("/from/env")

    def test_default(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
        assert resolve_output_dir(None, GlobalConfig()) == Path(DEFAULT_OUTPUT_DIR)
