"""Online self-learning: predict, compare, update only when the error is large.

For each measurement the model predicts y_hat(k). If the normalized
residual |e(k)| exceeds ``epsilon`` one gradient step is taken at that
sample; otherwise the model is left exactly as it was.
"""

import itertools
import logging
from collections.abc import Iterable
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

from smoothfuzz._logging import log_structured
from smoothfuzz._tracing import span
from smoothfuzz.config import AdaptConfig
from smoothfuzz.exceptions import EmptyStreamError
from smoothfuzz.model import FuzzyModel, predict
from smoothfuzz.train import sample_gradients, update_step

logger = logging.getLogger(__name__)

Sample = tuple[ArrayLike, float]


class AdaptStep(BaseModel):
    """One processed measurement; ``e`` is y_hat - y in raw units."""

    model_config = ConfigDict(frozen=True)

    k: int
    y_hat: float
    y: float
    e: float
    updated: bool


class AdaptTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: list[AdaptStep] = []
    rms_window: int = Field(default=50, ge=1)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def update_count(self) -> int:
        return sum(step.updated for step in self.steps)

    @property
    def residuals(self) -> NDArray[np.float64]:
        return np.array([step.e for step in self.steps], dtype=np.float64)

    def trailing_rms(self, window: int | None = None) -> NDArray[np.float64]:
        """RMS of e over the last ``window`` steps, at every step."""
        squared = pd.Series(self.residuals**2)
        mean = squared.rolling(window or self.rms_window, min_periods=1).mean()
        return np.sqrt(mean.to_numpy())

    def final_rms(self, window: int | None = None) -> float:
        """Trailing RMS at the last step (0 for an empty trace)."""
        if not self.steps:
            return 0.0
        return float(self.trailing_rms(window)[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [step.model_dump() for step in self.steps],
            columns=["k", "y_hat", "y", "e", "updated"],
        )

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path


def self_learn_step(
    model: FuzzyModel, x: ArrayLike, y: float, config: AdaptConfig
) -> tuple[FuzzyModel, float, bool]:
    """Predict, then update once if the normalized residual exceeds epsilon.

    Returns the (possibly) updated model, the raw prediction made before
    the update and whether an update fired. Without an update the same
    model object is returned.
    """
    y_hat, record = predict(model, x)
    y_internal = float(model.scaling.to_internal_output(y))
    if abs(record.internal_output - y_internal) <= config.epsilon:
        return model, y_hat, False
    x_internal = model.scaling.to_internal_inputs(np.asarray(x, dtype=np.float64).reshape(-1))
    _, grads = sample_gradients(model, x_internal, y_internal)
    return update_step(model, grads, config), y_hat, True


def _bounded(stream: Iterable[Sample], horizon: int | None) -> Iterable[Sample]:
    return stream if horizon is None else itertools.islice(stream, horizon)


def run_online(
    model: FuzzyModel,
    stream: Iterable[Sample],
    config: AdaptConfig | None = None,
) -> tuple[FuzzyModel, AdaptTrace]:
    """Apply ``self_learn_step`` to each (x, y) until the horizon or stream end.

    Raises:
        EmptyStreamError: If the stream yields nothing and the horizon is not 0.
    """
    config = config or AdaptConfig()
    steps: list[AdaptStep] = []
    with span("smoothfuzz.run_online", {"smoothfuzz.composition": model.composition.name}) as current:
        for k, (x, y) in enumerate(_bounded(stream, config.horizon)):
            model, y_hat, updated = self_learn_step(model, x, y, config)
            steps.append(AdaptStep(k=k, y_hat=y_hat, y=float(y), e=y_hat - float(y), updated=updated))
        if not steps and config.horizon != 0:
            raise EmptyStreamError("Online stream yielded no samples")
        trace = AdaptTrace(steps=steps, rms_window=config.rms_window)
        current.set_attribute("smoothfuzz.steps", len(trace))
        current.set_attribute("smoothfuzz.updates", trace.update_count)
    log_structured(
        logger,
        logging.INFO,
        "Online",
        composition=model.composition.name,
        steps=len(trace),
        updates=trace.update_count,
        trailing_rms=trace.final_rms(),
    )
    return model, trace


def run_frozen(
    model: FuzzyModel,
    stream: Iterable[Sample],
    horizon: int | None = None,
    rms_window: int = 50,
) -> AdaptTrace:
    """Trace of a model that never adapts, for comparison runs."""
    steps = []
    for k, (x, y) in enumerate(_bounded(stream, horizon)):
        y_hat, _ = predict(model, x)
        steps.append(AdaptStep(k=k, y_hat=y_hat, y=float(y), e=y_hat - float(y), updated=False))
    if not steps and horizon != 0:
        raise EmptyStreamError("Online stream yielded no samples")
    return AdaptTrace(steps=steps, rms_window=rms_window)
