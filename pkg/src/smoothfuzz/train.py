"""Batch identification: error function, gradient chain, multi-start training.

Training runs in the model's normalized coordinates. The per-sample
residual is e = y_hat - y; one epoch walks the dataset in order and takes a
gradient step on 1/2 e^2 wherever |e| exceeds ``epsilon``. Training stops
when an epoch makes no update or after ``max_epochs`` epochs.
"""

import logging
import math
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict

from smoothfuzz._logging import log_structured
from smoothfuzz._tracing import span
from smoothfuzz.config import StepSizes, TrainConfig
from smoothfuzz.exceptions import (
    ArityMismatchError,
    DegenerateDenominatorError,
    EmptySequenceError,
    NormDomainError,
    TrainingDivergedError,
    WindowRangeError,
)
from smoothfuzz.membership import clamp_spread, gaussian_grads
from smoothfuzz.model import (
    DENOMINATOR_EPSILON,
    FuzzyModel,
    Scaling,
    fold_strengths,
    fold_strengths_with_grad,
    grid_model,
    memberships_internal,
    predict_batch,
)
from smoothfuzz.norms import CompositionKind
from smoothfuzz.plants.datasets import TimeSeriesDataset

logger = logging.getLogger(__name__)

__all__ = [
    "ParameterGradients",
    "RestartHistory",
    "TrainConfig",
    "TrainReport",
    "batch_error",
    "epoch_error",
    "evaluate_rms",
    "gradients",
    "identify",
    "initial_model",
    "train_model",
    "update_step",
]

# Restarts after the first shift grid centers by up to this share of the gap.
CENTER_JITTER = 0.1

Termination = Literal["tolerance", "max_epochs"]


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


class ParameterGradients(NamedTuple):
    """dE/dc and dE/ddelta (r x n) and dE/dd (r) for one sample."""

    dE_dc: NDArray[np.float64]
    dE_ddelta: NDArray[np.float64]
    dE_dd: NDArray[np.float64]


class RestartHistory(BaseModel):
    """E after initialization (epoch 0) and after every epoch of one restart."""

    model_config = ConfigDict(frozen=True)

    restart: int
    epoch_errors: list[float]
    epochs_used: int
    termination: Termination

    @property
    def final_error(self) -> float:
        return self.epoch_errors[-1]


class TrainReport(BaseModel):
    """Outcome of ``identify``; the top-level fields describe the winner."""

    model_config = ConfigDict(frozen=True)

    epoch_errors: list[float]
    final_rms: float
    winner: int
    epochs_used: int
    termination: Termination
    restarts: list[RestartHistory]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            (history.restart, epoch, error)
            for history in self.restarts
            for epoch, error in enumerate(history.epoch_errors)
        ]
        return pd.DataFrame(rows, columns=["restart", "epoch", "E"])

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path


# ---------------------------------------------------------------------------
# Error function
# ---------------------------------------------------------------------------


def _internal_outputs(model: FuzzyModel, x_internal: NDArray[np.float64]) -> NDArray[np.float64]:
    strengths = fold_strengths(
        model.composition, memberships_internal(model, x_internal), model.confidences
    )
    totals = strengths.sum(axis=-1)
    if not np.all(totals > DENOMINATOR_EPSILON):
        raise DegenerateDenominatorError(float(totals.min()))
    return strengths @ model.consequents / totals


def _residuals(model: FuzzyModel, inputs: ArrayLike, targets: ArrayLike) -> NDArray[np.float64]:
    """Residuals y_hat - y in normalized units."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[-1] != model.input_arity:
        raise ArityMismatchError(model.input_arity, x.shape[-1])
    scaling = model.scaling
    return _internal_outputs(model, scaling.to_internal_inputs(x)) - scaling.to_internal_output(
        targets
    )


def _window_error(residuals: NDArray[np.float64], horizon: int) -> float:
    return float(np.dot(residuals, residuals)) / (2.0 * max(horizon, 1))


def batch_error(model: FuzzyModel, dataset: TimeSeriesDataset, start: int, horizon: int) -> float:
    """E(k) = 1/(2T) * sum_{t=0..T} e(k+t)^2 over samples k .. k+T.

    Residuals are in normalized units. T = 0 is treated as T = 1 in the
    factor, so E(k) with T = 0 is the per-sample loss 1/2 e(k)^2.

    Raises:
        WindowRangeError: If the window does not fit inside the dataset.
    """
    size = len(dataset)
    if start < 0 or horizon < 0 or start + horizon >= size:
        raise WindowRangeError(start, horizon, size)
    stop = start + horizon + 1
    residuals = _residuals(model, dataset.inputs[start:stop], dataset.targets[start:stop])
    return _window_error(residuals, horizon)


def _tiled_error(residuals: NDArray[np.float64], horizon: int) -> float:
    length = horizon + 1
    if residuals.size < length:
        return _window_error(residuals, residuals.size - 1)
    count = residuals.size // length
    windows = residuals[: count * length].reshape(count, length)
    return float(np.mean(np.sum(windows * windows, axis=1))) / (2.0 * max(horizon, 1))


def epoch_error(model: FuzzyModel, dataset: TimeSeriesDataset, horizon: int) -> float:
    """Mean ``batch_error`` over back-to-back windows of horizon T.

    A dataset shorter than one window is scored as a single window.
    """
    if len(dataset) == 0:
        raise EmptySequenceError("Cannot score an empty dataset")
    return _tiled_error(_residuals(model, dataset.inputs, dataset.targets), horizon)


def evaluate_rms(model: FuzzyModel, dataset: TimeSeriesDataset) -> float:
    """Root-mean-square prediction error in raw units."""
    if len(dataset) == 0:
        raise EmptySequenceError("Cannot score an empty dataset")
    residuals = predict_batch(model, dataset.inputs) - dataset.targets
    return float(np.sqrt(np.mean(residuals * residuals)))


# ---------------------------------------------------------------------------
# Gradients and updates
# ---------------------------------------------------------------------------


def sample_gradients(
    model: FuzzyModel, x_internal: NDArray[np.float64], y_internal: float
) -> tuple[float, ParameterGradients]:
    """Residual and gradients of 1/2 e^2 for one normalized sample.

    dE/dc_ij = e (d_i - y_hat) / sum(y') * dy'_i/dmu_ij * dmu_ij/dc_ij, the
    same with dmu/ddelta for spreads, and dE/dd_i = e y'_i / sum(y').
    """
    mu, dmu_dc, dmu_ddelta = gaussian_grads(x_internal, model.centers, model.spreads)
    strengths, dy_dmu = fold_strengths_with_grad(model.composition, mu, model.confidences)
    total = float(strengths.sum())
    if not total > DENOMINATOR_EPSILON:
        raise DegenerateDenominatorError(total)
    y_hat = float(strengths @ model.consequents) / total
    e = y_hat - y_internal
    share = (model.consequents - y_hat) / total
    chain = e * share[:, np.newaxis] * dy_dmu
    return e, ParameterGradients(
        dE_dc=chain * dmu_dc,
        dE_ddelta=chain * dmu_ddelta,
        dE_dd=e * strengths / total,
    )


def gradients(model: FuzzyModel, x: ArrayLike, target: float) -> ParameterGradients:
    """Gradients of 1/2 e^2 at one raw-unit sample (the T = 0 error).

    Raises:
        ArityMismatchError: On a wrong-length input.
        DegenerateDenominatorError: If no rule fires.
    """
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape[0] != model.input_arity:
        raise ArityMismatchError(model.input_arity, arr.shape[0])
    scaling = model.scaling
    _, grads = sample_gradients(
        model, scaling.to_internal_inputs(arr), float(scaling.to_internal_output(target))
    )
    return grads


def update_step(model: FuzzyModel, grads: ParameterGradients, steps: StepSizes) -> FuzzyModel:
    """One descent step on centers, spreads and consequents.

    Spreads are clamped to the floor afterwards; the composition and the
    confidences are left untouched.
    """
    return model.replace(
        centers=model.centers - steps.alpha_c * grads.dE_dc,
        spreads=clamp_spread(model.spreads - steps.alpha_delta * grads.dE_ddelta),
        consequents=model.consequents - steps.alpha_d * grads.dE_dd,
    )


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def _grid_centers(mfs: int) -> tuple[NDArray[np.float64], float, float]:
    """Centers, spread and center gap for ``mfs`` functions on [0, 1]."""
    if mfs == 1:
        return np.array([0.5]), 0.5, 1.0
    gap = 1.0 / (mfs - 1)
    return np.linspace(0.0, 1.0, mfs), gap / 2.0, gap


def initial_model(
    dataset: TimeSeriesDataset,
    mfs_per_input: int,
    composition: CompositionKind,
    scaling: Scaling | None = None,
    rng: np.random.Generator | None = None,
) -> FuzzyModel:
    """Grid initialization in normalized coordinates.

    Each input gets ``mfs_per_input`` evenly spaced centers over its observed
    range with spread half the gap; each rule's consequent is the target of
    the training sample nearest its center vector. With ``rng`` the centers
    are jittered by up to 10% of the gap.
    """
    if mfs_per_input < 1:
        raise ValueError(f"mfs_per_input must be >= 1, got {mfs_per_input}")
    scaling = scaling or Scaling.fit(dataset.inputs, dataset.targets)
    centers, spread, gap = _grid_centers(mfs_per_input)
    per_input = []
    for _ in range(dataset.arity):
        jitter = 0.0
        if rng is not None:
            jitter = rng.uniform(-CENTER_JITTER * gap, CENTER_JITTER * gap, size=mfs_per_input)
        per_input.append(list(centers + jitter))

    x = scaling.to_internal_inputs(dataset.inputs)
    y = scaling.to_internal_output(dataset.targets)
    model = grid_model(
        per_input,
        [spread] * dataset.arity,
        np.zeros(mfs_per_input**dataset.arity),
        composition=composition,
        scaling=scaling,
    )
    distances = np.sum((model.centers[:, np.newaxis, :] - x[np.newaxis, :, :]) ** 2, axis=-1)
    return model.replace(consequents=y[np.argmin(distances, axis=1)])


def _jittered(model: FuzzyModel, mfs_per_input: int, rng: np.random.Generator) -> FuzzyModel:
    _, _, gap = _grid_centers(mfs_per_input)
    jitter = rng.uniform(-CENTER_JITTER * gap, CENTER_JITTER * gap, size=model.centers.shape)
    return model.replace(centers=model.centers + jitter)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def train_model(
    model: FuzzyModel,
    dataset: TimeSeriesDataset,
    config: TrainConfig,
    restart: int = 0,
) -> tuple[FuzzyModel, RestartHistory]:
    """Run the parameter-learning loop from ``model``.

    Raises:
        TrainingDivergedError: If E or a residual becomes non-finite.
    """
    scaling = model.scaling
    x = scaling.to_internal_inputs(dataset.inputs)
    y = scaling.to_internal_output(dataset.targets)

    def score(current: FuzzyModel, epoch: int) -> float:
        try:
            value = _tiled_error(_internal_outputs(current, x) - y, config.horizon)
        except (DegenerateDenominatorError, NormDomainError) as e:
            raise TrainingDivergedError(restart, epoch) from e
        if not math.isfinite(value):
            raise TrainingDivergedError(restart, epoch)
        return value

    errors = [score(model, 0)]
    termination: Termination = "max_epochs"
    epochs_used = 0
    for epoch in range(1, config.max_epochs + 1):
        updates = 0
        for i in range(len(dataset)):
            try:
                e, grads = sample_gradients(model, x[i], float(y[i]))
            except (DegenerateDenominatorError, NormDomainError) as exc:
                raise TrainingDivergedError(restart, epoch) from exc
            if not math.isfinite(e):
                raise TrainingDivergedError(restart, epoch)
            if abs(e) > config.epsilon:
                model = update_step(model, grads, config)
                updates += 1
        errors.append(score(model, epoch))
        epochs_used = epoch
        log_structured(
            logger, logging.DEBUG, "Epoch", restart=restart, epoch=epoch, error=errors[-1], updates=updates
        )
        if updates == 0:
            termination = "tolerance"
            break

    return model, RestartHistory(
        restart=restart, epoch_errors=errors, epochs_used=epochs_used, termination=termination
    )


def identify(
    dataset: TimeSeriesDataset,
    arity: int,
    mfs_per_input: int,
    composition: CompositionKind,
    config: TrainConfig | None = None,
    initial: FuzzyModel | None = None,
) -> tuple[FuzzyModel, TrainReport]:
    """Identify a grid fuzzy model from data, keeping the best of the restarts.

    Restart 0 starts from the plain grid (or from ``initial``); restart k >= 1
    jitters the centers with a generator seeded by (seed, k). The winner has
    the lowest final E, the earliest restart on ties.

    Raises:
        EmptySequenceError: On an empty dataset.
        ArityMismatchError: If ``arity`` differs from the dataset's.
        TrainingDivergedError: If any restart diverges.
    """
    config = config or TrainConfig()
    if len(dataset) == 0:
        raise EmptySequenceError("Cannot train on an empty dataset")
    if dataset.arity != arity:
        raise ArityMismatchError(arity, dataset.arity)
    if initial is not None and initial.input_arity != arity:
        raise ArityMismatchError(arity, initial.input_arity)

    attributes = {
        "smoothfuzz.composition": composition.name,
        "smoothfuzz.rules": mfs_per_input**arity,
        "smoothfuzz.samples": len(dataset),
        "smoothfuzz.restarts": config.restarts,
    }
    with span("smoothfuzz.identify", attributes) as current:
        scaling = initial.scaling if initial is not None else Scaling.fit(dataset.inputs, dataset.targets)
        results: list[tuple[FuzzyModel, RestartHistory]] = []
        for restart in range(config.restarts):
            rng = np.random.default_rng([config.seed, restart]) if restart else None
            if initial is not None:
                start = initial.replace(composition=composition)
                if rng is not None:
                    start = _jittered(start, mfs_per_input, rng)
            else:
                start = initial_model(dataset, mfs_per_input, composition, scaling, rng)
            with span("smoothfuzz.restart", {"smoothfuzz.restart": restart}):
                try:
                    trained, history = train_model(start, dataset, config, restart)
                except TrainingDivergedError as e:
                    log_structured(
                        logger,
                        logging.ERROR,
                        "Diverged",
                        composition=composition.name,
                        restart=e.restart,
                        epoch=e.epoch,
                    )
                    raise
            log_structured(
                logger,
                logging.DEBUG,
                "Restart",
                composition=composition.name,
                restart=restart,
                epochs=history.epochs_used,
                error=history.final_error,
                termination=history.termination,
            )
            results.append((trained, history))

        winner = min(range(len(results)), key=lambda i: (results[i][1].final_error, i))
        model, best = results[winner]
        report = TrainReport(
            epoch_errors=best.epoch_errors,
            final_rms=evaluate_rms(model, dataset),
            winner=winner,
            epochs_used=best.epochs_used,
            termination=best.termination,
            restarts=[history for _, history in results],
        )
        current.set_attribute("smoothfuzz.winner", winner)
        current.set_attribute("smoothfuzz.final_rms", report.final_rms)
    log_structured(
        logger,
        logging.INFO,
        "Identified",
        composition=composition.name,
        winner=winner,
        error=best.final_error,
        rms=report.final_rms,
        termination=best.termination,
    )
    return model, report
