"""Reference plants: Mackey–Glass and the CSTR, plus dataset construction."""

from smoothfuzz.plants.cstr import (
    NOMINAL_QC,
    TRAINING_QC_LEVELS,
    VALIDATION_QC_LEVELS,
    CstrParams,
    CstrSeries,
    CstrState,
    cstr_simulate,
    step_qc_profile,
    training_qc_profile,
    validation_qc_profile,
)
from smoothfuzz.plants.datasets import (
    CSTR_LAGS,
    CSTR_OFFSET,
    MACKEY_GLASS_LAGS,
    MACKEY_GLASS_OFFSET,
    LagSpec,
    TimeSeriesDataset,
    build_regression_dataset,
    read_dataset_csv,
    write_dataset_csv,
    write_series_csv,
)
from smoothfuzz.plants.mackey_glass import (
    DelayLine,
    MackeyGlassParams,
    MackeyGlassSeries,
    mackey_glass,
)
from smoothfuzz.plants.scenarios import (
    Noise,
    Nominal,
    ParamChange,
    QcStepProfile,
    Scenario,
    Tc0Sinusoid,
)

__all__ = [
    "CSTR_LAGS",
    "CSTR_OFFSET",
    "MACKEY_GLASS_LAGS",
    "MACKEY_GLASS_OFFSET",
    "NOMINAL_QC",
    "TRAINING_QC_LEVELS",
    "VALIDATION_QC_LEVELS",
    "CstrParams",
    "CstrSeries",
    "CstrState",
    "DelayLine",
    "LagSpec",
    "MackeyGlassParams",
    "MackeyGlassSeries",
    "Noise",
    "Nominal",
    "ParamChange",
    "QcStepProfile",
    "Scenario",
    "Tc0Sinusoid",
    "TimeSeriesDataset",
    "build_regression_dataset",
    "cstr_simulate",
    "mackey_glass",
    "read_dataset_csv",
    "step_qc_profile",
    "training_qc_profile",
    "validation_qc_profile",
    "write_dataset_csv",
    "write_series_csv",
]
