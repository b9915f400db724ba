"""Lag-embedded regression datasets and their CSV forms."""

import json
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from smoothfuzz._logging import log_structured
from smoothfuzz.exceptions import DatasetParseError, InsufficientDataError

logger = logging.getLogger(__name__)

# 17 significant digits round-trip every float64.
CSV_FLOAT_FORMAT = "%.17g"

META_SUFFIX = ".meta.json"


class LagSpec(BaseModel):
    """Input ``column`` delayed by ``lag`` samples."""

    model_config = ConfigDict(frozen=True)

    column: str
    lag: int = Field(ge=0)

    @property
    def label(self) -> str:
        return f"{self.column}(k)" if self.lag == 0 else f"{self.column}(k-{self.lag})"


MACKEY_GLASS_LAGS: tuple[LagSpec, ...] = tuple(LagSpec(column="x", lag=lag) for lag in (0, 6, 12, 18))
MACKEY_GLASS_OFFSET = 6

CSTR_LAGS: tuple[LagSpec, ...] = (
    LagSpec(column="ca", lag=0),
    LagSpec(column="ca", lag=1),
    LagSpec(column="ca", lag=2),
    LagSpec(column="qc", lag=1),
)
CSTR_OFFSET = 1


class TimeSeriesDataset(BaseModel):
    """Ordered (x, y) samples. ``inputs`` is N x n, ``targets`` has length N."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    inputs: NDArray[np.float64]
    targets: NDArray[np.float64]
    input_names: list[str]
    target_name: str = "y"
    metadata: dict[str, Any] = {}

    @model_validator(mode="after")
    def _shapes(self) -> "TimeSeriesDataset":
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be a 2-D array")
        if self.targets.shape != (self.inputs.shape[0],):
            raise ValueError(
                f"targets shape {self.targets.shape} does not match "
                f"{self.inputs.shape[0]} input rows"
            )
        if len(self.input_names) != self.inputs.shape[1]:
            raise ValueError("input_names must name every input column")
        return self

    @classmethod
    def from_arrays(
        cls,
        inputs: ArrayLike,
        targets: ArrayLike,
        input_names: Sequence[str] | None = None,
        target_name: str = "y",
        metadata: dict[str, Any] | None = None,
    ) -> "TimeSeriesDataset":
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        y = np.asarray(targets, dtype=np.float64).reshape(-1)
        if x.shape[0] != y.shape[0] and x.shape[0] == 1:
            x = x.T
        names = list(input_names) if input_names else [f"x{j + 1}" for j in range(x.shape[1])]
        return cls(
            inputs=x, targets=y, input_names=names, target_name=target_name, metadata=metadata or {}
        )

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    @property
    def arity(self) -> int:
        return int(self.inputs.shape[1])

    def window(self, start: int, stop: int) -> "TimeSeriesDataset":
        return self.model_copy(
            update={"inputs": self.inputs[start:stop], "targets": self.targets[start:stop]}
        )

    def split(self, fraction: float) -> tuple["TimeSeriesDataset", "TimeSeriesDataset"]:
        """Chronological split: the first ``fraction`` of samples, then the rest."""
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"Split fraction must lie in (0, 1), got {fraction}")
        cut = int(round(len(self) * fraction))
        cut = min(max(cut, 1), len(self) - 1)
        return self.window(0, cut), self.window(cut, len(self))

    def samples(self) -> list[tuple[NDArray[np.float64], float]]:
        return [(self.inputs[i], float(self.targets[i])) for i in range(len(self))]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.inputs, columns=self.input_names)
        frame[self.target_name] = self.targets
        return frame


def build_regression_dataset(
    series: Mapping[str, ArrayLike] | pd.DataFrame,
    lag_map: Sequence[LagSpec | tuple[str, int]],
    target: str,
    offset: int,
    metadata: dict[str, Any] | None = None,
) -> TimeSeriesDataset:
    """Lag-embed ``series``: x(k) per ``lag_map``, y(k) = target(k + offset).

    Yields ``len(series) - deepest lag - offset`` samples in time order.

    Raises:
        InsufficientDataError: If no sample fits.
        KeyError: If a named column is missing.
    """
    if offset < 0:
        raise ValueError(f"Prediction offset must be >= 0, got {offset}")
    lags = [spec if isinstance(spec, LagSpec) else LagSpec(column=spec[0], lag=spec[1]) for spec in lag_map]
    if not lags:
        raise ValueError("lag_map must name at least one input")
    columns = {name: np.asarray(series[name], dtype=np.float64) for name in {s.column for s in lags} | {target}}
    length = min(len(col) for col in columns.values())
    deepest = max(spec.lag for spec in lags)
    count = length - deepest - offset
    if count < 1:
        raise InsufficientDataError(deepest + offset, length)

    rows = np.arange(deepest, deepest + count)
    inputs = np.column_stack([columns[spec.column][rows - spec.lag] for spec in lags])
    targets = columns[target][rows + offset]
    target_name = f"{target}(k+{offset})" if offset else f"{target}(k)"
    meta = {"lag_map": [spec.model_dump() for spec in lags], "offset": offset, "target": target}
    meta.update(metadata or {})
    return TimeSeriesDataset(
        inputs=inputs,
        targets=targets,
        input_names=[spec.label for spec in lags],
        target_name=target_name,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# CSV files
# ---------------------------------------------------------------------------


def write_metadata(path: Path, metadata: Mapping[str, Any]) -> Path:
    """Write the ``<path>.meta.json`` sidecar next to a CSV artifact."""
    sidecar = path.with_name(path.name + META_SUFFIX)
    sidecar.write_text(json.dumps(metadata, indent=2, sort_keys=True, default=str) + "\n")
    return sidecar


def write_frame_csv(frame: pd.DataFrame, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_series_csv(frame: pd.DataFrame, path: Path | str, metadata: Mapping[str, Any]) -> Path:
    """Series CSV (``t`` first) plus its metadata sidecar."""
    path = write_frame_csv(frame, path)
    write_metadata(path, metadata)
    return path


def write_dataset_csv(dataset: TimeSeriesDataset, path: Path | str) -> Path:
    path = write_frame_csv(dataset.to_frame(), path)
    if dataset.metadata:
        write_metadata(path, dataset.metadata)
    return path


def read_dataset_csv(path: Path | str, target: str | None = None) -> TimeSeriesDataset:
    """Load a dataset CSV; the target is ``target`` or else the last column.

    Raises:
        DatasetParseError: On an unreadable file or a non-numeric cell. Row
            numbers count the header as row 1, matching the file's lines.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise DatasetParseError(f"Dataset file not found: {path}")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DatasetParseError(f"Cannot parse {path}: {e}")
    if frame.shape[1] < 2:
        raise DatasetParseError(f"{path} needs at least one input and one target column")
    if frame.empty:
        raise DatasetParseError(f"{path} has no data rows")

    target_name = target or str(frame.columns[-1])
    if target_name not in frame.columns:
        raise DatasetParseError(f"Target column '{target_name}' not in {path}")
    for column in frame.columns:
        values = frame[column]
        if not pd.api.types.is_numeric_dtype(values):
            values = pd.to_numeric(values, errors="coerce")
        missing = np.flatnonzero(values.isna().to_numpy())
        if missing.size:
            row_pos = int(missing[0])
            raise DatasetParseError(
                f"Non-numeric value {frame[column].iat[row_pos]!r}",
                row=row_pos + 2,
                column=str(column),
            )

    input_names = [str(c) for c in frame.columns if c != target_name]
    log_structured(logger, logging.DEBUG, "Dataset", path=str(path), rows=len(frame), inputs=len(input_names))
    return TimeSeriesDataset(
        inputs=frame[input_names].to_numpy(dtype=np.float64),
        targets=frame[target_name].to_numpy(dtype=np.float64),
        input_names=input_names,
        target_name=target_name,
    )
