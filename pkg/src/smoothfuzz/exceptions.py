"""smoothfuzz exception hierarchy."""


class SmoothFuzzError(Exception):
    """Base exception for all smoothfuzz errors."""


class ConfigError(SmoothFuzzError):
    """Raised on configuration validation failure."""


class NormDomainError(SmoothFuzzError, ValueError):
    """Raised when a norm argument lies outside the unit interval."""

    def __init__(self, value: float) -> None:
        self.value = value
        super().__init__(f"Norm argument outside [0, 1]: {value!r}")


class EmptySequenceError(SmoothFuzzError, ValueError):
    """Raised when an operation needs at least one element and got none."""


class EmptyStreamError(EmptySequenceError):
    """Raised when an online stream yields no samples."""


class ArityMismatchError(SmoothFuzzError, ValueError):
    """Raised when an input vector does not match the model's input arity."""

    def __init__(self, expected: int, got: int) -> None:
        self.expected = expected
        self.got = got
        super().__init__(f"Expected {expected} input(s), got {got}")


class DegenerateDenominatorError(SmoothFuzzError, ArithmeticError):
    """Raised when the defuzzification denominator vanishes."""

    def __init__(self, total: float) -> None:
        self.total = total
        super().__init__(f"Sum of rule strengths is degenerate: {total!r}")


class ModelFileError(SmoothFuzzError):
    """Raised when a model file cannot be parsed or violates an invariant.

    ``line`` and ``field`` point at the offending location when known.
    """

    def __init__(
        self,
        message: str,
        line: int | None = None,
        field: str | None = None,
    ) -> None:
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class ModelVersionError(ModelFileError):
    """Raised when a model file declares an unsupported format_version."""

    def __init__(self, version: object, supported: int) -> None:
        self.version = version
        self.supported = supported
        super().__init__(
            f"Unsupported format_version {version!r} (supported: {supported})",
            field="format_version",
        )


class WindowRangeError(SmoothFuzzError, IndexError):
    """Raised when an error window does not fit inside the dataset."""

    def __init__(self, start: int, horizon: int, size: int) -> None:
        self.start = start
        self.horizon = horizon
        self.size = size
        super().__init__(
            f"Window [{start}, {start + horizon}] outside dataset of {size} samples"
        )


class TrainingDivergedError(SmoothFuzzError):
    """Raised when the error function becomes non-finite during training."""

    def __init__(self, restart: int, epoch: int) -> None:
        self.restart = restart
        self.epoch = epoch
        super().__init__(
            f"Training diverged (non-finite error) in restart {restart}, epoch {epoch}"
        )


class IntegrationError(SmoothFuzzError, ArithmeticError):
    """Raised when a plant simulation produces a non-finite state."""

    def __init__(self, plant: str, time: float) -> None:
        self.plant = plant
        self.time = time
        super().__init__(f"{plant} integration produced a non-finite state at t={time:g}")


class PlantParameterError(SmoothFuzzError, ValueError):
    """Raised on invalid plant parameters or excitation profiles."""


class InsufficientDataError(SmoothFuzzError, ValueError):
    """Raised when a series is too short for the requested lag structure."""

    def __init__(self, required: int, available: int) -> None:
        self.required = required
        self.available = available
        super().__init__(
            f"Series too short: need more than {required} samples, got {available}"
        )


class DatasetParseError(SmoothFuzzError):
    """Raised when a dataset CSV contains unparseable rows."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None) -> None:
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class ArtifactError(SmoothFuzzError):
    """Raised when an output artifact cannot be written."""

    def __init__(self, path: object, reason: str) -> None:
        self.path = path
        super().__init__(f"Cannot write {path}: {reason}")
