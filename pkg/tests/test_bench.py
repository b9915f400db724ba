"""Tests for experiment specs, result tables and experiment runs."""

import json
import logging
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from smoothfuzz import bench
from smoothfuzz.bench import (
    FAILED,
    CellResult,
    CompositionRow,
    ExperimentSpec,
    ResultTable,
    build_experiment_spec,
    derive_seed,
    load_experiment,
    prepare_data,
    rms,
    run_experiment,
)
from smoothfuzz.exceptions import ConfigError, EmptySequenceError, TrainingDivergedError
from smoothfuzz.plants.scenarios import Noise, ParamChange
from smoothfuzz.train import identify as real_identify


def _make_spec_data(**overrides) -> dict:
    """A Mackey-Glass study small enough for a unit test."""
    data = {
        "name": "tiny",
        "plant": "mackey_glass",
        "compositions": ["prodsum", "atan"],
        "mfs_per_input": 2,
        "seed": 5,
        "train": {"max_epochs": 2, "horizon": 10, "alpha_c": 0.05, "alpha_delta": 0.05, "alpha_d": 0.1},
        "adapt": {"rms_window": 20},
        "mackey_glass": {"params": {"duration": 400.0}, "washout": 50},
        "scenarios": [
            {"name": "nominal", "scenario": {"kind": "nominal"}},
            {"name": "shift", "scenario": {"kind": "param_change", "switch_time": 20.0, "overrides": {"b": 0.15}}},
        ],
    }
    data.update(overrides)
    return data


def _make_spec(**overrides) -> ExperimentSpec:
    return build_experiment_spec(_make_spec_data(**overrides))


def _make_cell(value: float) -> CellResult:
    return CellResult(rms=value, frozen_rms=2 * value, trailing_rms=value, frozen_trailing_rms=2 * value, updates=3)


# --- rms and seeds ---


class TestRms:
    def test_value(self):
        assert rms([3.0, 4.0]) == pytest.approx(np.sqrt(12.5))

    def test_zero(self):
        assert rms(np.zeros(5)) == 0.0

    def test_empty(self):
        with pytest.raises(EmptySequenceError):
            rms([])


class TestDeriveSeed:
    def test_reproducible(self):
        assert derive_seed(0, 1) == derive_seed(0, 1)

    def test_distinct_paths(self):
        seeds = {derive_seed(0, i) for i in range(20)}
        assert len(seeds) == 20
        assert derive_seed(0, 1) != derive_seed(1, 1)


# --- Experiment spec ---


class TestExperimentSpec:
    def test_packaged_experiments(self):
        mg = load_experiment("mackey_glass")
        assert mg.plant == "mackey_glass"
        assert mg.compositions == ["minmax", "prodsum", "atan", "acos"]
        assert mg.scenario_names == ["nominal", "param_change", "noise"]
        cstr = load_experiment("cstr")
        assert cstr.mfs_per_input == 3
        assert cstr.scenario_names == ["nominal", "disturbance"]

    def test_adapt_epsilon_inherited(self):
        spec = _make_spec(train={"epsilon": 0.02})
        assert spec.adapt.epsilon == 0.02

    def test_composition_names_canonical(self):
        spec = _make_spec(compositions=["ATAN", "smooth1"], beta=3.0)
        assert spec.compositions == ["atan", "smooth1"]
        assert spec.kinds[1].beta == 3.0

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"compositions": ["atan", "atan"]}, "repeat"),
            ({"compositions": ["lukasiewicz"]}, "Unknown composition"),
            ({"arity": 3}, "lag map"),
            ({"plant": "pendulum"}, "plant"),
            ({"seed": -1}, "seed"),
            ({"scenarios": [{"name": "training", "scenario": {"kind": "nominal"}}]}, "reserved"),
            ({"scenarios": [{"name": "Bad Name", "scenario": {"kind": "nominal"}}]}, "scenario name"),
            (
                {
                    "scenarios": [
                        {"name": "a", "scenario": {"kind": "nominal"}},
                        {"name": "a", "scenario": {"kind": "nominal"}},
                    ]
                },
                "unique",
            ),
        ],
    )
    def test_invalid_specs(self, overrides, message):
        with pytest.raises(ConfigError, match=message):
            _make_spec(**overrides)

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            load_experiment("pendulum")


# --- Data preparation ---


class TestPrepareData:
    def test_mackey_glass_streams_follow_training(self):
        spec = _make_spec()
        data = prepare_data(spec)
        assert set(data.streams) == {"nominal", "shift"}
        assert len(data.streams["nominal"]) == len(data.streams["shift"])
        assert len(data.train) + len(data.streams["nominal"]) == 400 + 1 - 50 - 18 - 6

    def test_param_change_switches_inside_validation(self):
        data = prepare_data(_make_spec())
        nominal, shifted = data.streams["nominal"], data.streams["shift"]
        np.testing.assert_array_equal(nominal.targets[:10], shifted.targets[:10])
        assert not np.allclose(nominal.targets[-50:], shifted.targets[-50:])

    def test_cstr_streams(self):
        spec = build_experiment_spec(
            {
                "name": "tiny_cstr",
                "plant": "cstr",
                "compositions": ["prodsum"],
                "cstr": {"dwell_samples": 20},
                "scenarios": [
                    {"name": "nominal", "scenario": {"kind": "nominal"}},
                    {"name": "disturbance", "scenario": {"kind": "tc0_sinusoid"}},
                ],
            }
        )
        data = prepare_data(spec)
        assert len(data.train) == 6 * 20 + 1 - 2 - 1
        assert data.train.input_names == ["ca(k)", "ca(k-1)", "ca(k-2)", "qc(k-1)"]
        assert not np.array_equal(data.streams["nominal"].targets, data.streams["disturbance"].targets)


# --- Result table ---


class TestResultTable:
    def _table(self) -> ResultTable:
        return ResultTable(
            experiment="tiny",
            scenarios=["nominal", "shift"],
            rows=[
                CompositionRow(
                    composition="prodsum",
                    training_rms=0.1,
                    seed=1,
                    cells={"nominal": _make_cell(0.2), "shift": _make_cell(0.3)},
                ),
                CompositionRow(
                    composition="atan",
                    training_rms=0.05,
                    seed=2,
                    cells={"nominal": _make_cell(0.1)},
                    failures={"shift": "TrainingDivergedError: boom"},
                ),
            ],
        )

    def test_frame_layout(self):
        frame = self._table().to_frame()
        assert list(frame.columns) == [
            "composition",
            "training",
            "nominal",
            "nominal_frozen",
            "shift",
            "shift_frozen",
        ]
        assert frame.loc[1, "shift"] == FAILED
        assert frame.loc[0, "nominal_frozen"] == pytest.approx(0.4)

    def test_lookup_and_counts(self):
        table = self._table()
        assert table.compositions == ["prodsum", "atan"]
        assert table.failure_count == 1
        assert not table.total_failure
        assert table.cell("atan", "shift") is None
        assert table.cell("prodsum", "shift").rms == 0.3
        with pytest.raises(KeyError):
            table.cell("minmax", "shift")

    def test_csv(self, tmp_path):
        path = self._table().to_csv(tmp_path / "results.csv")
        loaded = pd.read_csv(path)
        assert loaded.loc[1, "shift"] == FAILED


# --- Experiment runs ---


class TestRunExperiment:
    def test_full_run_writes_artifacts(self, tmp_path, caplog):
        spec = _make_spec()
        with caplog.at_level(logging.INFO, logger="smoothfuzz.bench"):
            result = run_experiment(spec, tmp_path)
        assert "Artifacts | dir=" in caplog.text
        assert "files=13" in caplog.text
        assert result.table.compositions == ["prodsum", "atan"]
        assert result.table.failure_count == 0
        for name in ("prodsum", "atan"):
            for scenario in ("nominal", "shift"):
                cell = result.table.cell(name, scenario)
                assert cell.rms >= 0.0
                assert np.isfinite(cell.frozen_rms)

        expected = {
            "results.csv",
            "convergence_prodsum.csv",
            "convergence_atan.csv",
            "trace_prodsum_nominal.csv",
            "trace_prodsum_shift.csv",
            "trace_atan_nominal.csv",
            "trace_atan_shift.csv",
            "convergence.svg",
            "fit_prodsum.svg",
            "fit_atan.svg",
            "response_nominal.svg",
            "response_shift.svg",
            "manifest.json",
        }
        assert {p.name for p in result.artifacts} == expected
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["experiment"] == "tiny"
        assert manifest["seeds"] == {row.composition: row.seed for row in result.table.rows}
        assert "manifest.json" not in manifest["files"]
        assert manifest["failures"] == {}

    def test_deterministic(self, tmp_path):
        spec = _make_spec()
        run_experiment(spec, tmp_path / "a")
        run_experiment(spec, tmp_path / "b")
        for name in ("results.csv", "trace_atan_shift.csv", "convergence.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_training_failure_marked(self, tmp_path):
        def flaky(dataset, arity, mfs, kind, config=None, initial=None):
            if kind.name == "atan":
                raise TrainingDivergedError(restart=0, epoch=1)
            return real_identify(dataset, arity, mfs, kind, config, initial)

        with patch.object(bench, "identify", side_effect=flaky):
            result = run_experiment(_make_spec(), tmp_path)
        row = result.table.rows[1]
        assert row.training_rms is None
        assert row.failures["training"].startswith("TrainingDivergedError")
        assert not result.table.total_failure
        frame = pd.read_csv(tmp_path / "results.csv")
        assert frame.loc[1, "training"] == FAILED
        assert frame.loc[1, "nominal"] == FAILED
        assert "fit_atan.svg" not in {p.name for p in result.artifacts}

    def test_scenario_failure_isolated(self):
        real_job = bench._scenario_job

        def flaky(model, stream, config, scenario):
            if scenario == "shift" and model.composition.name == "prodsum":
                raise RuntimeError("stream broke")
            return real_job(model, stream, config, scenario)

        with patch.object(bench, "_scenario_job", side_effect=flaky):
            result = run_experiment(_make_spec())
        assert result.table.cell("prodsum", "shift") is None
        assert result.table.cell("atan", "shift") is not None
        assert result.table.rows[0].failures == {"shift": "RuntimeError: stream broke"}
        assert result.artifacts == []

    async def test_async_entry_point(self):
        result = await bench.run_experiment_async(_make_spec(compositions=["prodsum"]))
        assert result.table.compositions == ["prodsum"]
        assert result.table.failure_count == 0
        assert result.artifacts == []


# --- Packaged experiments ---

SEEDS = range(5)
SMOOTH = ["atan", "acos"]

# The atan disjunction saturates near 1 faster than the probabilistic sum.
_ATAN_SATURATES = pytest.mark.xfail(
    reason="atan rule strengths saturate; measured training RMS stays above prodsum", strict=False
)


@pytest.fixture(scope="module")
def seeded_runs() -> dict[int, bench.ExperimentResult]:
    spec = load_experiment("mackey_glass").model_copy(update={"compositions": ["prodsum", *SMOOTH]})
    return {seed: run_experiment(spec.model_copy(update={"seed": seed})) for seed in SEEDS}


def _column_rms(result: bench.ExperimentResult, composition: str, column: str) -> float:
    if column == "training":
        row = result.table.rows[result.table.compositions.index(composition)]
        return row.training_rms
    return result.table.cell(composition, column).trailing_rms


@pytest.mark.slow
class TestPackagedExperiments:
    def test_mackey_glass_reproducible(self, tmp_path):
        spec = load_experiment("mackey_glass")
        spec = spec.model_copy(update={"train": spec.train.model_copy(update={"max_epochs": 5})})
        first = run_experiment(spec, tmp_path / "a")
        second = run_experiment(spec, tmp_path / "b")
        assert first.table == second.table
        assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()

    def test_runs_complete(self, seeded_runs):
        for result in seeded_runs.values():
            assert result.table.failure_count == 0

    @pytest.mark.parametrize("composition", SMOOTH)
    def test_adaptation_beats_frozen_after_parameter_change(self, seeded_runs, composition):
        for seed, result in seeded_runs.items():
            cell = result.table.cell(composition, "param_change")
            assert cell.updates > 0
            assert cell.trailing_rms < cell.frozen_trailing_rms, f"seed {seed}"

    @pytest.mark.parametrize(
        ("composition", "column"),
        [
            pytest.param("atan", "training", marks=_ATAN_SATURATES),
            pytest.param("atan", "param_change"),
            pytest.param("atan", "noise", marks=_ATAN_SATURATES),
            pytest.param("acos", "training"),
            pytest.param("acos", "param_change"),
            pytest.param("acos", "noise"),
        ],
    )
    def test_smooth_beats_product_sum(self, seeded_runs, composition, column):
        wins = sum(
            _column_rms(result, composition, column) < _column_rms(result, "prodsum", column)
            for result in seeded_runs.values()
        )
        assert wins >= 4
