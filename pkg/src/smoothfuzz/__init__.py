"""smoothfuzz: rule-based fuzzy models with smooth s-t compositions."""

import importlib

__version__ = "0.1.0"

from smoothfuzz.adapt import AdaptStep, AdaptTrace, run_frozen, run_online, self_learn_step
from smoothfuzz.config import (
    AdaptConfig,
    GlobalConfig,
    StepSizes,
    TrainConfig,
    load_global_config,
)
from smoothfuzz.exceptions import (
    ArityMismatchError,
    ArtifactError,
    ConfigError,
    DatasetParseError,
    DegenerateDenominatorError,
    EmptySequenceError,
    EmptyStreamError,
    InsufficientDataError,
    IntegrationError,
    ModelFileError,
    ModelVersionError,
    NormDomainError,
    PlantParameterError,
    SmoothFuzzError,
    TrainingDivergedError,
    WindowRangeError,
)
from smoothfuzz.membership import GaussianMF, dmu_dc, dmu_ddelta, mu
from smoothfuzz.model import (
    FiringRecord,
    FuzzyModel,
    Rule,
    Scaling,
    defuzzify,
    fuzzify,
    grid_model,
    load_model,
    predict,
    predict_batch,
    rule_strength,
    rule_strength_grad,
    save_model,
)
from smoothfuzz.norms import (
    ALL_KINDS,
    COMPOSITION_NAMES,
    MIN_MAX,
    PRODUCT_SUM,
    SMOOTH_ACOS,
    SMOOTH_ATAN,
    SMOOTH_I,
    SMOOTH_IV,
    SMOOTH_KINDS,
    CompositionKind,
    CompositionTag,
    NormEval,
    dual_s_from_t,
    fold_s,
    fold_t,
    s_norm,
    t_norm,
)
from smoothfuzz.train import (
    ParameterGradients,
    TrainReport,
    batch_error,
    epoch_error,
    evaluate_rms,
    gradients,
    identify,
    update_step,
)

# Experiment and chart code pull in matplotlib; import them on first access.
_LAZY_IMPORTS: dict[str, str] = {
    "ExperimentSpec": "smoothfuzz.bench",
    "ResultTable": "smoothfuzz.bench",
    "load_experiment": "smoothfuzz.bench",
    "rms": "smoothfuzz.bench",
    "run_experiment": "smoothfuzz.bench",
    "emit_charts": "smoothfuzz.charts",
}


def __getattr__(name: str):
    if name in _LAZY_IMPORTS:
        module = importlib.import_module(_LAZY_IMPORTS[name])
        attr = getattr(module, name)
        globals()[name] = attr
        return attr
    raise AttributeError(f"module 'smoothfuzz' has no attribute {name!r}")


__all__ = [
    "ALL_KINDS",
    "COMPOSITION_NAMES",
    "MIN_MAX",
    "PRODUCT_SUM",
    "SMOOTH_ACOS",
    "SMOOTH_ATAN",
    "SMOOTH_I",
    "SMOOTH_IV",
    "SMOOTH_KINDS",
    "AdaptConfig",
    "AdaptStep",
    "AdaptTrace",
    "ArityMismatchError",
    "ArtifactError",
    "CompositionKind",
    "CompositionTag",
    "ConfigError",
    "DatasetParseError",
    "DegenerateDenominatorError",
    "EmptySequenceError",
    "EmptyStreamError",
    "ExperimentSpec",
    "FiringRecord",
    "FuzzyModel",
    "GaussianMF",
    "GlobalConfig",
    "InsufficientDataError",
    "IntegrationError",
    "ModelFileError",
    "ModelVersionError",
    "NormDomainError",
    "NormEval",
    "ParameterGradients",
    "PlantParameterError",
    "ResultTable",
    "Rule",
    "Scaling",
    "SmoothFuzzError",
    "StepSizes",
    "TrainConfig",
    "TrainReport",
    "TrainingDivergedError",
    "WindowRangeError",
    "__version__",
    "batch_error",
    "defuzzify",
    "dmu_dc",
    "dmu_ddelta",
    "dual_s_from_t",
    "emit_charts",
    "epoch_error",
    "evaluate_rms",
    "fold_s",
    "fold_t",
    "fuzzify",
    "gradients",
    "grid_model",
    "identify",
    "load_experiment",
    "load_global_config",
    "load_model",
    "mu",
    "predict",
    "predict_batch",
    "rms",
    "rule_strength",
    "rule_strength_grad",
    "run_experiment",
    "run_frozen",
    "run_online",
    "s_norm",
    "save_model",
    "self_learn_step",
    "t_norm",
    "update_step",
]
