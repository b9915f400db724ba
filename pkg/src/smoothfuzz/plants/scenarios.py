"""Scenario variants applied to the reference plants (discriminated on ``kind``)."""

from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Nominal(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["nominal"] = "nominal"


class ParamChange(BaseModel):
    """Override plant parameters from ``switch_time`` onward."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["param_change"] = "param_change"
    switch_time: float = Field(default=0.0, ge=0.0)
    overrides: dict[str, float] = Field(min_length=1)


class Noise(BaseModel):
    """Per-step jitter: parameter = nominal + amplitude * r, r ~ U(-1, 1)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["noise"] = "noise"
    parameter: str = "b"
    amplitude: float = Field(default=0.05, ge=0.0)
    seed: int = Field(default=0, ge=0)


class QcStepProfile(BaseModel):
    """Piecewise-constant coolant flow: ``levels[i]`` holds until ``switch_times[i]``."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["qc_steps"] = "qc_steps"
    levels: list[float] = Field(min_length=1)
    switch_times: list[float] = []

    @model_validator(mode="after")
    def _consistent(self) -> "QcStepProfile":
        if len(self.switch_times) != len(self.levels) - 1:
            raise ValueError("switch_times must have one entry fewer than levels")
        if any(b <= a for a, b in zip(self.switch_times, self.switch_times[1:])):
            raise ValueError("switch_times must be strictly increasing")
        return self

    @classmethod
    def constant(cls, qc: float) -> "QcStepProfile":
        return cls(levels=[qc])

    def at(self, t: float) -> float:
        return self.levels[int(np.searchsorted(self.switch_times, t, side="right"))]


class Tc0Sinusoid(BaseModel):
    """Temperature disturbance ``offset + amplitude * sin(k)`` at sample index k.

    ``target`` selects the coolant inlet (``tc0``) or the feed (``t0``).
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["tc0_sinusoid"] = "tc0_sinusoid"
    amplitude: float = 5.0
    offset: float = 350.0
    target: Literal["tc0", "t0"] = "tc0"

    def at(self, k: int) -> float:
        return self.offset + self.amplitude * float(np.sin(k))


Scenario = Annotated[
    Union[Nominal, ParamChange, Noise, QcStepProfile, Tc0Sinusoid],
    Field(discriminator="kind"),
]
