"""Mackey–Glass delay-differential system.

    dx/dt = a x(t - tau) / (1 + x(t - tau)^C) - b x(t)

Integrated with the classical fixed-step RK4 scheme. The delayed state is
read from a ring buffer of past grid values by linear interpolation, with
constant pre-history x(t) = x0 for t <= 0.
"""

import logging
import math

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from smoothfuzz._logging import log_structured
from smoothfuzz.exceptions import IntegrationError, PlantParameterError
from smoothfuzz.plants.scenarios import Noise, Nominal, ParamChange, Scenario

logger = logging.getLogger(__name__)

_MG_PARAMETERS = ("a", "b", "C")


class MackeyGlassParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float = 0.2
    b: float = 0.1
    C: float = 10.0
    tau: float = Field(default=17.0, gt=0.0)
    x0: float = 1.2
    dt: float = Field(default=0.1, gt=0.0)
    duration: float = Field(default=1000.0, gt=0.0)
    sample_interval: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _step_fits_delay(self) -> "MackeyGlassParams":
        if self.dt > self.tau / 10.0 + 1e-12:
            raise ValueError(f"dt={self.dt} must be <= tau/10={self.tau / 10.0}")
        stride = self.sample_interval / self.dt
        if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
            raise ValueError("sample_interval must be a positive multiple of dt")
        return self


class MackeyGlassSeries(BaseModel):
    """Sampled trajectory x(t) with the parameters and scenario that made it."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: NDArray[np.float64]
    x: NDArray[np.float64]
    params: MackeyGlassParams
    scenario: Scenario

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t, "x": self.x})


class DelayLine:
    """Ring buffer of the most recent grid values of x.

    ``value_at(p)`` returns x at fractional grid index p by linear
    interpolation; p <= 0 reads the constant pre-history.
    """

    def __init__(self, x0: float, capacity: int) -> None:
        self._x0 = x0
        self._buffer = np.full(capacity, x0, dtype=np.float64)
        self._capacity = capacity
        self._latest = 0

    def push(self, index: int, value: float) -> None:
        self._buffer[index % self._capacity] = value
        self._latest = index

    def _grid(self, i: int) -> float:
        if i <= 0:
            return self._x0
        if i > self._latest or self._latest - i >= self._capacity:
            raise IndexError(f"grid index {i} not held in delay line")
        return float(self._buffer[i % self._capacity])

    def value_at(self, p: float) -> float:
        if p <= 0.0:
            return self._x0
        nearest = round(p)
        if abs(p - nearest) < 1e-9:
            return self._grid(nearest)
        i = math.floor(p)
        frac = p - i
        return (1.0 - frac) * self._grid(i) + frac * self._grid(i + 1)


def _coefficients(
    params: MackeyGlassParams,
    scenario: Scenario,
    t: float,
    rng: np.random.Generator | None,
) -> tuple[float, float, float]:
    values = {"a": params.a, "b": params.b, "C": params.C}
    if isinstance(scenario, ParamChange) and t >= scenario.switch_time:
        values.update(scenario.overrides)
    elif isinstance(scenario, Noise) and rng is not None:
        values[scenario.parameter] += scenario.amplitude * rng.uniform(-1.0, 1.0)
    return values["a"], values["b"], values["C"]


def _validate_scenario(scenario: Scenario) -> None:
    if isinstance(scenario, ParamChange):
        unknown = set(scenario.overrides) - set(_MG_PARAMETERS)
        if unknown:
            raise PlantParameterError(
                f"Unknown Mackey-Glass parameter(s) {sorted(unknown)}; "
                f"valid: {list(_MG_PARAMETERS)}"
            )
    elif isinstance(scenario, Noise):
        if scenario.parameter not in _MG_PARAMETERS:
            raise PlantParameterError(
                f"Unknown Mackey-Glass parameter '{scenario.parameter}'"
            )
    elif not isinstance(scenario, Nominal):
        raise PlantParameterError(f"Scenario '{scenario.kind}' does not apply to Mackey-Glass")


def mackey_glass(
    params: MackeyGlassParams | None = None,
    scenario: Scenario | None = None,
) -> MackeyGlassSeries:
    """Integrate the delay equation and sample it every ``sample_interval``.

    Raises:
        PlantParameterError: If the scenario does not fit this plant.
        IntegrationError: If the state becomes non-finite.
    """
    params = params or MackeyGlassParams()
    scenario = scenario or Nominal()
    _validate_scenario(scenario)

    dt = params.dt
    steps = int(round(params.duration / dt))
    stride = int(round(params.sample_interval / dt))
    delay = params.tau / dt
    line = DelayLine(params.x0, capacity=int(math.ceil(delay)) + 3)
    rng = np.random.default_rng(scenario.seed) if isinstance(scenario, Noise) else None

    x = params.x0
    samples = [x]
    for i in range(steps):
        t = i * dt
        a, b, c = _coefficients(params, scenario, t, rng)

        def rate(state: float, lagged: float) -> float:
            return a * lagged / (1.0 + lagged**c) - b * state

        lag_now = line.value_at(i - delay)
        lag_half = line.value_at(i + 0.5 - delay)
        lag_next = line.value_at(i + 1 - delay)
        k1 = rate(x, lag_now)
        k2 = rate(x + 0.5 * dt * k1, lag_half)
        k3 = rate(x + 0.5 * dt * k2, lag_half)
        k4 = rate(x + dt * k3, lag_next)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(x):
            raise IntegrationError("mackey-glass", (i + 1) * dt)
        line.push(i + 1, x)
        if (i + 1) % stride == 0:
            samples.append(x)

    x_arr = np.asarray(samples, dtype=np.float64)
    t_arr = np.arange(len(x_arr), dtype=np.float64) * stride * dt
    log_structured(
        logger,
        logging.DEBUG,
        "Integrated",
        plant="mackey_glass",
        steps=steps,
        samples=len(x_arr),
        scenario=scenario.kind,
    )
    return MackeyGlassSeries(t=t_arr, x=x_arr, params=params, scenario=scenario)
