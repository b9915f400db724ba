"""Experiment orchestration: train every composition, run every scenario.

A run has two phases of independent jobs executed on worker threads:
identification of one model per composition, then one online-adaptation
cell per (composition, scenario). Each job gets a seed derived from the
experiment seed and its position, so results do not depend on scheduling.
Failed jobs are recorded in the table instead of aborting the run.
"""

import asyncio
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import matplotlib
import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import smoothfuzz
from smoothfuzz._logging import log_structured
from smoothfuzz._tracing import span
from smoothfuzz.adapt import AdaptTrace, run_frozen, run_online
from smoothfuzz.charts import ChartTrace, LineChart, emit_charts
from smoothfuzz.config import AdaptConfig, TrainConfig, load_experiment_data
from smoothfuzz.exceptions import ConfigError, EmptySequenceError, PlantParameterError
from smoothfuzz.model import FuzzyModel, predict_batch
from smoothfuzz.norms import CompositionKind
from smoothfuzz.plants.cstr import CstrParams, cstr_simulate, training_qc_profile, validation_qc_profile
from smoothfuzz.plants.datasets import (
    CSTR_LAGS,
    CSTR_OFFSET,
    MACKEY_GLASS_LAGS,
    MACKEY_GLASS_OFFSET,
    TimeSeriesDataset,
    build_regression_dataset,
    write_frame_csv,
)
from smoothfuzz.plants.mackey_glass import MackeyGlassParams, mackey_glass
from smoothfuzz.plants.scenarios import (
    Noise,
    Nominal,
    ParamChange,
    QcStepProfile,
    Scenario,
    Tc0Sinusoid,
)
from smoothfuzz.train import TrainReport, identify

logger = logging.getLogger(__name__)

FAILED = "FAILED"

_SCENARIO_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")

_PLANT_ARITY = {
    "mackey_glass": len(MACKEY_GLASS_LAGS),
    "cstr": len(CSTR_LAGS),
}


# ---------------------------------------------------------------------------
# Experiment spec
# ---------------------------------------------------------------------------


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    scenario: Scenario

    @field_validator("name")
    @classmethod
    def _identifier(cls, v: str) -> str:
        if not _SCENARIO_NAME_RE.match(v):
            raise ValueError(f"Invalid scenario name '{v}'")
        return v


class MackeyGlassSetup(BaseModel):
    """Samples before ``washout`` are dropped; ``split`` is the training share."""

    model_config = ConfigDict(frozen=True)

    params: MackeyGlassParams = MackeyGlassParams()
    washout: int = Field(default=100, ge=0)
    split: float = Field(default=0.6, gt=0.0, lt=1.0)


class CstrSetup(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: CstrParams = CstrParams()
    dwell_samples: int = Field(default=100, ge=1)
    dt: float = Field(default=0.01, gt=0.0)
    sample_period: float = Field(default=0.1, gt=0.0)


class ExperimentSpec(BaseModel):
    """A full comparison study for one plant."""

    model_config = ConfigDict(frozen=True)

    name: str
    plant: Literal["mackey_glass", "cstr"]
    compositions: list[str] = Field(min_length=1)
    beta: float = Field(default=2.0, gt=1.0)
    arity: int = 4
    mfs_per_input: int = Field(default=2, ge=1)
    seed: int = Field(default=0, ge=0)
    train: TrainConfig = TrainConfig()
    adapt: AdaptConfig = AdaptConfig()
    scenarios: list[ScenarioSpec] = []
    mackey_glass: MackeyGlassSetup = MackeyGlassSetup()
    cstr: CstrSetup = CstrSetup()

    @field_validator("compositions")
    @classmethod
    def _known_compositions(cls, v: list[str]) -> list[str]:
        names = [CompositionKind.parse(name).name for name in v]
        if len(set(names)) != len(names):
            raise ValueError("compositions must not repeat")
        return names

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentSpec":
        expected = _PLANT_ARITY[self.plant]
        if self.arity != expected:
            raise ValueError(f"arity {self.arity} does not match the {self.plant} lag map ({expected})")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ValueError("scenario names must be unique")
        if "training" in names:
            raise ValueError("'training' is reserved for the training column")
        return self

    @property
    def kinds(self) -> list[CompositionKind]:
        return [CompositionKind.parse(name, beta=self.beta) for name in self.compositions]

    @property
    def scenario_names(self) -> list[str]:
        return [s.name for s in self.scenarios]


def build_experiment_spec(data: dict[str, Any]) -> ExperimentSpec:
    """Validate experiment data; ``adapt.epsilon`` defaults to ``train.epsilon``.

    Raises:
        ConfigError: On any validation failure.
    """
    data = dict(data)
    train = dict(data.get("train", {}))
    adapt = dict(data.get("adapt", {}))
    if "epsilon" in train:
        adapt.setdefault("epsilon", train["epsilon"])
    data["adapt"] = adapt
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment spec '{data.get('name', '?')}': {e}")


def load_experiment(name: str) -> ExperimentSpec:
    """Load a packaged experiment (``mackey_glass`` or ``cstr``)."""
    return build_experiment_spec(load_experiment_data(name))


def derive_seed(seed: int, *path: int) -> int:
    """Independent, reproducible seed for the job at ``path``."""
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Data preparation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PreparedData:
    """Training set plus one evaluation stream per scenario."""

    train: TimeSeriesDataset
    streams: dict[str, TimeSeriesDataset]


def _mackey_glass_dataset(spec: ExperimentSpec, scenario: Scenario) -> TimeSeriesDataset:
    setup = spec.mackey_glass
    series = mackey_glass(setup.params, scenario)
    return build_regression_dataset(
        {"x": series.x[setup.washout :]},
        MACKEY_GLASS_LAGS,
        target="x",
        offset=MACKEY_GLASS_OFFSET,
        metadata={"plant": "mackey_glass", "scenario": scenario.model_dump()},
    )


def _prepare_mackey_glass(spec: ExperimentSpec) -> PreparedData:
    setup = spec.mackey_glass
    nominal = _mackey_glass_dataset(spec, Nominal())
    train, validation = nominal.split(setup.split)
    deepest = max(lag.lag for lag in MACKEY_GLASS_LAGS)
    boundary = (setup.washout + deepest + len(train)) * setup.params.sample_interval

    streams = {}
    for index, entry in enumerate(spec.scenarios):
        scenario = entry.scenario
        if isinstance(scenario, Nominal):
            streams[entry.name] = validation
            continue
        if isinstance(scenario, ParamChange):
            # switch_time counts from the start of the validation segment
            scenario = scenario.model_copy(update={"switch_time": boundary + scenario.switch_time})
        elif isinstance(scenario, Noise):
            scenario = scenario.model_copy(
                update={"seed": derive_seed(spec.seed, 1000 + index, scenario.seed)}
            )
        else:
            raise PlantParameterError(f"Scenario '{scenario.kind}' does not apply to Mackey-Glass")
        dataset = _mackey_glass_dataset(spec, scenario)
        streams[entry.name] = dataset.window(len(train), len(dataset))
    return PreparedData(train=train, streams=streams)


def _cstr_dataset(
    spec: ExperimentSpec,
    profile: QcStepProfile,
    disturbance: Tc0Sinusoid | None = None,
    params: CstrParams | None = None,
) -> TimeSeriesDataset:
    setup = spec.cstr
    series = cstr_simulate(
        params or setup.params,
        profile,
        disturbance,
        dt=setup.dt,
        duration=len(profile.levels) * setup.dwell_samples * setup.sample_period,
        sample_period=setup.sample_period,
    )
    return build_regression_dataset(
        series.to_frame(),
        CSTR_LAGS,
        target="ca",
        offset=CSTR_OFFSET,
        metadata={"plant": "cstr", "qc_levels": profile.levels},
    )


def _prepare_cstr(spec: ExperimentSpec) -> PreparedData:
    setup = spec.cstr
    train = _cstr_dataset(spec, training_qc_profile(setup.dwell_samples, setup.sample_period))
    validation_profile = validation_qc_profile(setup.dwell_samples, setup.sample_period)

    streams = {}
    for entry in spec.scenarios:
        scenario = entry.scenario
        if isinstance(scenario, Nominal):
            streams[entry.name] = _cstr_dataset(spec, validation_profile)
        elif isinstance(scenario, Tc0Sinusoid):
            streams[entry.name] = _cstr_dataset(spec, validation_profile, disturbance=scenario)
        elif isinstance(scenario, QcStepProfile):
            streams[entry.name] = _cstr_dataset(spec, scenario)
        elif isinstance(scenario, ParamChange):
            try:
                params = CstrParams.model_validate(
                    setup.params.model_dump(exclude={"k1", "k2", "k3"}) | scenario.overrides
                )
            except ValidationError as e:
                raise PlantParameterError(f"Invalid CSTR override {scenario.overrides}: {e}")
            streams[entry.name] = _cstr_dataset(spec, validation_profile, params=params)
        else:
            raise PlantParameterError(f"Scenario '{scenario.kind}' does not apply to the CSTR")
    return PreparedData(train=train, streams=streams)


def prepare_data(spec: ExperimentSpec) -> PreparedData:
    if spec.plant == "mackey_glass":
        return _prepare_mackey_glass(spec)
    return _prepare_cstr(spec)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


def rms(residuals: ArrayLike) -> float:
    """sqrt(mean(e^2)).

    Raises:
        EmptySequenceError: On an empty input.
    """
    e = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if e.size == 0:
        raise EmptySequenceError("rms of an empty residual series")
    return float(np.sqrt(np.mean(e * e)))


class CellResult(BaseModel):
    """Online run of one trained model on one scenario stream (raw units)."""

    model_config = ConfigDict(frozen=True)

    rms: float
    frozen_rms: float
    trailing_rms: float
    frozen_trailing_rms: float
    updates: int


class CompositionRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    composition: str
    training_rms: float | None = None
    seed: int
    cells: dict[str, CellResult] = {}
    failures: dict[str, str] = {}


class ResultTable(BaseModel):
    """One row per composition; a missing cell has a failure message instead."""

    model_config = ConfigDict(frozen=True)

    experiment: str
    scenarios: list[str]
    rows: list[CompositionRow]

    @property
    def compositions(self) -> list[str]:
        return [row.composition for row in self.rows]

    @property
    def failure_count(self) -> int:
        return sum(len(row.failures) for row in self.rows)

    @property
    def total_failure(self) -> bool:
        return all(row.training_rms is None for row in self.rows)

    def cell(self, composition: str, scenario: str) -> CellResult | None:
        for row in self.rows:
            if row.composition == composition:
                return row.cells.get(scenario)
        raise KeyError(composition)

    def to_frame(self) -> pd.DataFrame:
        records = []
        for row in self.rows:
            record: dict[str, Any] = {
                "composition": row.composition,
                "training": FAILED if row.training_rms is None else row.training_rms,
            }
            for name in self.scenarios:
                cell = row.cells.get(name)
                record[name] = FAILED if cell is None else cell.rms
                record[f"{name}_frozen"] = FAILED if cell is None else cell.frozen_rms
            records.append(record)
        return pd.DataFrame(records)

    def to_csv(self, path: Path | str) -> Path:
        return write_frame_csv(self.to_frame(), path)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    table: ResultTable
    reports: dict[str, TrainReport] = field(default_factory=dict)
    models: dict[str, FuzzyModel] = field(default_factory=dict)
    traces: dict[tuple[str, str], tuple[AdaptTrace, AdaptTrace]] = field(default_factory=dict)
    data: PreparedData | None = None
    artifacts: list[Path] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Jobs
# ---------------------------------------------------------------------------


def _train_job(
    spec: ExperimentSpec, data: PreparedData, kind: CompositionKind, seed: int
) -> tuple[FuzzyModel, TrainReport]:
    with span("smoothfuzz.cell", {"smoothfuzz.composition": kind.name, "smoothfuzz.scenario": "training"}):
        config = spec.train.model_copy(update={"seed": seed})
        return identify(data.train, spec.arity, spec.mfs_per_input, kind, config)


def _scenario_job(
    model: FuzzyModel, stream: TimeSeriesDataset, config: AdaptConfig, scenario: str
) -> tuple[CellResult, AdaptTrace, AdaptTrace]:
    attributes = {"smoothfuzz.composition": model.composition.name, "smoothfuzz.scenario": scenario}
    with span("smoothfuzz.cell", attributes):
        _, adaptive = run_online(model.copy(), stream.samples(), config)
        frozen = run_frozen(model, stream.samples(), config.horizon, config.rms_window)
        cell = CellResult(
            rms=rms(adaptive.residuals),
            frozen_rms=rms(frozen.residuals),
            trailing_rms=adaptive.final_rms(),
            frozen_trailing_rms=frozen.final_rms(),
            updates=adaptive.update_count,
        )
        return cell, adaptive, frozen


def _failure(label: str, composition: str, error: BaseException) -> str:
    log_structured(
        logger, logging.WARNING, "Cell failed", composition=composition, cell=label, error=str(error)
    )
    return f"{type(error).__name__}: {error}"


async def run_experiment_async(spec: ExperimentSpec, output_dir: Path | str | None = None) -> ExperimentResult:
    """Async form of ``run_experiment``; jobs run in worker threads."""
    with span("smoothfuzz.experiment", {"smoothfuzz.experiment": spec.name, "smoothfuzz.seed": spec.seed}):
        data = await asyncio.to_thread(prepare_data, spec)
        kinds = spec.kinds
        seeds = [derive_seed(spec.seed, index) for index in range(len(kinds))]
        trained = await asyncio.gather(
            *(asyncio.to_thread(_train_job, spec, data, kind, seed) for kind, seed in zip(kinds, seeds)),
            return_exceptions=True,
        )

        result = ExperimentResult(spec=spec, table=ResultTable(experiment=spec.name, scenarios=[], rows=[]), data=data)
        jobs, keys = [], []
        for kind, outcome in zip(kinds, trained):
            if isinstance(outcome, Exception):
                continue
            model, report = outcome
            result.models[kind.name] = model
            result.reports[kind.name] = report
            for name in spec.scenario_names:
                keys.append((kind.name, name))
                jobs.append(asyncio.to_thread(_scenario_job, model, data.streams[name], spec.adapt, name))
        outcomes = dict(zip(keys, await asyncio.gather(*jobs, return_exceptions=True)))

        rows = []
        for kind, seed, training in zip(kinds, seeds, trained):
            cells: dict[str, CellResult] = {}
            failures: dict[str, str] = {}
            training_rms = None
            if isinstance(training, BaseException):
                failures["training"] = _failure("training", kind.name, training)
                failures.update({name: "training failed" for name in spec.scenario_names})
            else:
                training_rms = training[1].final_rms
                for name in spec.scenario_names:
                    outcome = outcomes[(kind.name, name)]
                    if isinstance(outcome, BaseException):
                        failures[name] = _failure(name, kind.name, outcome)
                        continue
                    cell, adaptive, frozen = outcome
                    cells[name] = cell
                    result.traces[(kind.name, name)] = (adaptive, frozen)
            rows.append(
                CompositionRow(
                    composition=kind.name,
                    training_rms=training_rms,
                    seed=seed,
                    cells=cells,
                    failures=failures,
                )
            )
        result.table = ResultTable(experiment=spec.name, scenarios=spec.scenario_names, rows=rows)
        log_structured(
            logger,
            logging.INFO,
            "Experiment",
            name=spec.name,
            compositions=len(rows),
            scenarios=len(spec.scenarios),
            failures=result.table.failure_count,
        )

        if output_dir is not None:
            result.artifacts = await asyncio.to_thread(write_artifacts, result, Path(output_dir))
    return result


def run_experiment(spec: ExperimentSpec, output_dir: Path | str | None = None) -> ExperimentResult:
    """Train every composition, evaluate every scenario, optionally write artifacts.

    Deterministic for a given spec; per-cell failures are recorded in the
    table with the ``FAILED`` marker.
    """
    return asyncio.run(run_experiment_async(spec, output_dir))


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def _charts(result: ExperimentResult) -> list[LineChart]:
    charts = []
    if result.reports:
        charts.append(
            LineChart(
                filename="convergence.svg",
                title=f"{result.spec.name}: training error per epoch",
                xlabel="epoch",
                ylabel="E",
                log_y=True,
                traces=[
                    ChartTrace(
                        label=name,
                        x=list(range(len(report.epoch_errors))),
                        y=report.epoch_errors,
                    )
                    for name, report in result.reports.items()
                ],
            )
        )

    if result.data is None:
        return charts
    train = result.data.train
    first = result.spec.scenario_names[0] if result.spec.scenarios else None
    for name, model in result.models.items():
        measured = list(train.targets)
        predicted = list(predict_batch(model, train.inputs))
        if first is not None and (name, first) in result.traces:
            adaptive, _ = result.traces[(name, first)]
            measured += [step.y for step in adaptive.steps]
            predicted += [step.y_hat for step in adaptive.steps]
        samples = list(range(len(measured)))
        charts.append(
            LineChart(
                filename=f"fit_{name}.svg",
                title=f"{result.spec.name}: {name} training and validation",
                xlabel="sample",
                ylabel=train.target_name,
                traces=[
                    ChartTrace(label="measured", x=samples, y=measured),
                    ChartTrace(label="model", x=samples, y=predicted),
                ],
            )
        )

    for scenario in result.spec.scenario_names:
        traces = []
        for name in result.models:
            if (name, scenario) not in result.traces:
                continue
            adaptive, frozen = result.traces[(name, scenario)]
            steps = list(range(len(adaptive)))
            traces.append(ChartTrace(label=name, x=steps, y=list(adaptive.trailing_rms())))
            traces.append(ChartTrace(label=f"{name} frozen", x=steps, y=list(frozen.trailing_rms())))
        if traces:
            charts.append(
                LineChart(
                    filename=f"response_{scenario}.svg",
                    title=f"{result.spec.name}: {scenario} trailing RMS",
                    xlabel="sample",
                    ylabel="trailing RMS",
                    traces=traces,
                )
            )
    return charts


def _manifest(result: ExperimentResult, files: list[Path], directory: Path) -> dict[str, Any]:
    return {
        "experiment": result.spec.name,
        "spec": result.spec.model_dump(mode="json"),
        "seeds": {row.composition: row.seed for row in result.table.rows},
        "failures": {row.composition: row.failures for row in result.table.rows if row.failures},
        "versions": {
            "smoothfuzz": smoothfuzz.__version__,
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "files": sorted(str(path.relative_to(directory)) for path in files),
    }


def write_artifacts(result: ExperimentResult, directory: Path) -> list[Path]:
    """results.csv, convergence/trace CSVs, SVG charts and manifest.json."""
    directory.mkdir(parents=True, exist_ok=True)
    files = [result.table.to_csv(directory / "results.csv")]
    for name, report in result.reports.items():
        files.append(report.to_csv(directory / f"convergence_{name}.csv"))
    for (name, scenario), (adaptive, _) in result.traces.items():
        files.append(adaptive.to_csv(directory / f"trace_{name}_{scenario}.csv"))
    charts = _charts(result)
    if charts:
        files.extend(emit_charts(charts, directory))
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps(_manifest(result, files, directory), indent=2, sort_keys=True) + "\n")
    files.append(manifest)
    log_structured(logger, logging.INFO, "Artifacts", dir=str(directory), files=len(files))
    return files
