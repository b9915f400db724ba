"""Static SVG line charts for experiment artifacts.

Rendering goes through the matplotlib object API (no pyplot state), with a
fixed hash salt and no timestamp so identical data gives identical bytes.
"""

import io
import logging
from collections.abc import Sequence
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure
from pydantic import BaseModel, ConfigDict, Field, model_validator

from smoothfuzz._logging import log_structured
from smoothfuzz.exceptions import ArtifactError, EmptySequenceError

logger = logging.getLogger(__name__)

_SVG_RC = {
    "svg.hashsalt": "smoothfuzz",
    "svg.fonttype": "none",
    "path.simplify": False,
}


class ChartTrace(BaseModel):
    """One line; the SVG group carrying it has id ``trace-<index>``."""

    model_config = ConfigDict(frozen=True)

    label: str
    x: list[float]
    y: list[float]

    @model_validator(mode="after")
    def _same_length(self) -> "ChartTrace":
        if len(self.x) != len(self.y):
            raise ValueError(f"x has {len(self.x)} points, y has {len(self.y)}")
        return self


class LineChart(BaseModel):
    model_config = ConfigDict(frozen=True)

    filename: str
    title: str
    xlabel: str
    ylabel: str
    traces: list[ChartTrace] = Field(min_length=1)
    log_y: bool = False


def render_svg(chart: LineChart) -> bytes:
    with matplotlib.rc_context(_SVG_RC):
        fig = Figure(figsize=(8.0, 4.5))
        ax = fig.add_subplot()
        for index, trace in enumerate(chart.traces):
            (line,) = ax.plot(trace.x, trace.y, label=trace.label, linewidth=1.2)
            line.set_gid(f"trace-{index}")
        if chart.log_y:
            ax.set_yscale("log")
        ax.set_title(chart.title)
        ax.set_xlabel(chart.xlabel)
        ax.set_ylabel(chart.ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        fig.tight_layout()
        buffer = io.BytesIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def emit_charts(charts: Sequence[LineChart], directory: Path | str) -> list[Path]:
    """Write each chart to ``directory/<filename>``.

    Raises:
        EmptySequenceError: If there is nothing to draw.
        ArtifactError: If a file cannot be written (carries the path).
    """
    if not charts:
        raise EmptySequenceError("No charts to emit")
    directory = Path(directory)
    written = []
    for chart in charts:
        path = directory / chart.filename
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(render_svg(chart))
        except OSError as e:
            raise ArtifactError(path, e.strerror or str(e)) from e
        log_structured(logger, logging.DEBUG, "Chart", path=str(path))
        written.append(path)
    return written
