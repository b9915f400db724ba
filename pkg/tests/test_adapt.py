"""Tests for the online self-learning loop."""

import logging
from unittest.mock import MagicMock, patch

import numpy as np
import pandas as pd
import pytest

from smoothfuzz.adapt import AdaptStep, AdaptTrace, run_frozen, run_online, self_learn_step
from smoothfuzz.config import AdaptConfig
from smoothfuzz.exceptions import EmptyStreamError
from smoothfuzz.model import FuzzyModel, Scaling, grid_model, predict
from smoothfuzz.norms import PRODUCT_SUM, SMOOTH_ATAN


def _make_model(scaling: Scaling | None = None) -> FuzzyModel:
    return grid_model(
        centers_per_input=[[0.0, 1.0], [0.0, 1.0]],
        spreads_per_input=[0.5, 0.5],
        consequents=[0.2, 0.4, 0.6, 0.8],
        composition=SMOOTH_ATAN,
        scaling=scaling,
    )


def _make_stream(count: int, seed: int = 0, shift: float = 0.0) -> list[tuple[np.ndarray, float]]:
    rng = np.random.default_rng(seed)
    x = rng.random((count, 2))
    y = 0.6 * x[:, 0] + 0.2 * x[:, 1] + shift
    return [(row, float(value)) for row, value in zip(x, y)]


def _make_mock_tracer() -> tuple[MagicMock, MagicMock]:
    mock_tracer = MagicMock()
    mock_span = MagicMock()
    mock_tracer.start_as_current_span.return_value.__enter__ = MagicMock(return_value=mock_span)
    mock_tracer.start_as_current_span.return_value.__exit__ = MagicMock(return_value=False)
    return mock_tracer, mock_span


# --- self_learn_step ---


class TestSelfLearnStep:
    def test_no_update_within_tolerance(self):
        model = _make_model()
        x = np.array([0.3, 0.7])
        y_hat, _ = predict(model, x)
        updated_model, prediction, updated = self_learn_step(model, x, y_hat + 1e-4, AdaptConfig(epsilon=1e-3))
        assert updated is False
        assert updated_model is model
        assert prediction == y_hat

    def test_update_moves_prediction_toward_target(self):
        model = _make_model()
        x = np.array([0.3, 0.7])
        y_hat, _ = predict(model, x)
        target = y_hat + 0.3
        config = AdaptConfig(alpha_c=0.05, alpha_delta=0.05, alpha_d=0.5)
        updated_model, prediction, updated = self_learn_step(model, x, target, config)
        assert updated is True
        assert prediction == y_hat
        after, _ = predict(updated_model, x)
        assert abs(after - target) < abs(y_hat - target)
        np.testing.assert_array_equal(model.consequents, [0.2, 0.4, 0.6, 0.8])

    def test_threshold_on_normalized_residual(self):
        scaling = Scaling(input_low=[0.0, 0.0], input_span=[1.0, 1.0], output_low=0.0, output_span=100.0)
        model = _make_model(scaling)
        x = np.array([0.5, 0.5])
        y_hat, _ = predict(model, x)
        # raw residual 0.05 is 5e-4 in model units
        _, _, updated = self_learn_step(model, x, y_hat + 0.05, AdaptConfig(epsilon=1e-3))
        assert updated is False

    def test_zero_steps_freeze_parameters(self):
        model = _make_model()
        config = AdaptConfig(alpha_c=0.0, alpha_delta=0.0, alpha_d=0.0)
        updated_model, _, updated = self_learn_step(model, [0.1, 0.9], 5.0, config)
        assert updated is True
        assert updated_model.parameters_equal(model)


# --- run_online ---


class TestRunOnline:
    def test_trace_records_raw_residuals(self):
        stream = _make_stream(30)
        _, trace = run_online(_make_model(), stream, AdaptConfig())
        assert len(trace) == 30
        assert [step.k for step in trace.steps] == list(range(30))
        for step, (_, y) in zip(trace.steps, stream):
            assert step.y == y
            assert step.e == pytest.approx(step.y_hat - y)

    def test_horizon_caps_processing(self):
        _, trace = run_online(_make_model(), _make_stream(30), AdaptConfig(horizon=7))
        assert len(trace) == 7

    def test_horizon_reads_lazily(self):
        def endless():
            rng = np.random.default_rng(1)
            while True:
                x = rng.random(2)
                yield x, float(x.sum() / 2.0)

        _, trace = run_online(_make_model(), endless(), AdaptConfig(horizon=5))
        assert len(trace) == 5

    def test_empty_stream_raises(self):
        with pytest.raises(EmptyStreamError):
            run_online(_make_model(), [], AdaptConfig())

    def test_zero_horizon_allows_empty(self):
        model = _make_model()
        adapted, trace = run_online(model, [], AdaptConfig(horizon=0))
        assert len(trace) == 0
        assert adapted is model
        assert trace.final_rms() == 0.0

    def test_adaptation_tracks_shifted_plant(self):
        model = _make_model()
        stream = _make_stream(600, seed=3, shift=0.15)
        config = AdaptConfig(alpha_c=0.02, alpha_delta=0.02, alpha_d=0.2, epsilon=1e-3)
        _, adaptive = run_online(model, stream, config)
        frozen = run_frozen(model, stream)
        assert adaptive.final_rms(100) < frozen.final_rms(100)
        assert adaptive.update_count > 0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_recovers_after_plant_reverts(self, seed):
        settle, shifted, recovery = 2000, 300, 1000
        stream = (
            _make_stream(settle, seed=seed)
            + _make_stream(shifted, seed=seed + 100, shift=0.15)
            + _make_stream(recovery, seed=seed + 200)
        )
        config = AdaptConfig(alpha_c=0.02, alpha_delta=0.02, alpha_d=0.2, epsilon=1e-3, rms_window=100)
        _, trace = run_online(_make_model(), stream, config)
        trailing = trace.trailing_rms()
        before = trailing[settle - 1]
        assert trailing[settle : settle + shifted].max() > before
        assert np.any(trailing[settle + shifted :] <= 2.0 * before)

    def test_deterministic(self):
        stream = _make_stream(50)
        first, trace_a = run_online(_make_model(), stream)
        second, trace_b = run_online(_make_model(), stream)
        assert first.parameters_equal(second)
        assert trace_a == trace_b

    def test_span_and_log(self, caplog):
        mock_tracer, mock_span = _make_mock_tracer()
        with (
            patch("smoothfuzz._tracing.trace.get_tracer", return_value=mock_tracer),
            caplog.at_level(logging.INFO, logger="smoothfuzz.adapt"),
        ):
            run_online(_make_model(), _make_stream(10), AdaptConfig())
        assert mock_tracer.start_as_current_span.call_args[0][0] == "smoothfuzz.run_online"
        mock_span.set_attribute.assert_any_call("smoothfuzz.steps", 10)
        assert "Online | composition=atan steps=10" in caplog.text


# --- run_frozen and AdaptTrace ---


class TestRunFrozen:
    def test_never_updates(self):
        trace = run_frozen(_make_model(), _make_stream(20))
        assert trace.update_count == 0
        assert len(trace) == 20

    def test_horizon(self):
        assert len(run_frozen(_make_model(), _make_stream(20), horizon=4)) == 4

    def test_empty_stream(self):
        with pytest.raises(EmptyStreamError):
            run_frozen(_make_model(), [])


def _make_trace(residuals: list[float], window: int = 2) -> AdaptTrace:
    return AdaptTrace(
        steps=[
            AdaptStep(k=k, y_hat=e, y=0.0, e=e, updated=bool(k % 2))
            for k, e in enumerate(residuals)
        ],
        rms_window=window,
    )


class TestAdaptTrace:
    def test_trailing_rms(self):
        trace = _make_trace([3.0, 4.0, 0.0])
        np.testing.assert_allclose(trace.trailing_rms(), [3.0, np.sqrt(12.5), np.sqrt(8.0)])

    def test_final_rms_window_override(self):
        trace = _make_trace([3.0, 4.0, 0.0])
        assert trace.final_rms(3) == pytest.approx(np.sqrt(25.0 / 3.0))

    def test_update_count(self):
        assert _make_trace([1.0, 1.0, 1.0, 1.0]).update_count == 2

    def test_frame_and_csv(self, tmp_path):
        trace = _make_trace([0.1, -0.2])
        frame = trace.to_frame()
        assert list(frame.columns) == ["k", "y_hat", "y", "e", "updated"]
        path = trace.to_csv(tmp_path / "trace.csv")
        loaded = pd.read_csv(path, float_precision="round_trip")
        np.testing.assert_array_equal(loaded["e"].to_numpy(), [0.1, -0.2])
