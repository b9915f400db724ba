"""Continuous stirred tank reactor with an exothermic first-order reaction.

    dCa/dt = q/V (Ca0 - Ca) - k0 Ca exp(-E/RT)
    dT/dt  = q/V (T0 - T) + k1 Ca exp(-E/RT)
             + k2 qc (1 - exp(-k3/qc)) (Tc0 - T)

with k1 = -dH k0 / (rho Cp), k2 = rho_c Cpc / (rho Cp V) and
k3 = ha / (rho_c Cpc). The coolant flow qc drives the process; it and the
optional temperature disturbance are held constant within each step.
"""

import logging
import math

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator

from smoothfuzz._logging import log_structured
from smoothfuzz.exceptions import IntegrationError, PlantParameterError
from smoothfuzz.plants.scenarios import QcStepProfile, Tc0Sinusoid

logger = logging.getLogger(__name__)

# Coolant flow of the nominal operating point Ca = 0.1 mol/l, T = 438.5 K.
NOMINAL_QC = 103.411

TRAINING_QC_LEVELS = (103.0, 105.0, 110.0, 100.0, 99.0, 110.0)
VALIDATION_QC_LEVELS = (106.0, 100.0, 108.0, 102.0, 110.0, 104.0)


class CstrParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: float = Field(default=100.0, gt=0.0)  # l/min
    V: float = Field(default=100.0, gt=0.0)  # l
    k0: float = Field(default=7.2e10, gt=0.0)  # 1/min
    E_over_R: float = Field(default=1.0e4, gt=0.0)  # K
    T0: float = Field(default=350.0, gt=0.0)  # K
    Tc0: float = Field(default=350.0, gt=0.0)  # K
    dH: float = -2.0e5  # cal/mol
    Cp: float = Field(default=1.0, gt=0.0)  # cal/g/K
    Cpc: float = Field(default=1.0, gt=0.0)
    rho: float = Field(default=1.0e3, gt=0.0)  # g/l
    rho_c: float = Field(default=1.0e3, gt=0.0)
    ha: float = Field(default=7.0e5, gt=0.0)  # cal/min/K
    Ca0: float = Field(default=1.0, gt=0.0)  # mol/l

    @field_validator("dH")
    @classmethod
    def _exothermic(cls, v: float) -> float:
        if v >= 0.0:
            raise ValueError("dH must be negative (exothermic reaction)")
        return v

    @computed_field
    @property
    def k1(self) -> float:
        return -self.dH * self.k0 / (self.rho * self.Cp)

    @computed_field
    @property
    def k2(self) -> float:
        return self.rho_c * self.Cpc / (self.rho * self.Cp * self.V)

    @computed_field
    @property
    def k3(self) -> float:
        return self.ha / (self.rho_c * self.Cpc)


class CstrState(BaseModel):
    model_config = ConfigDict(frozen=True)

    Ca: float = Field(default=0.1, ge=0.0)  # mol/l
    T: float = Field(default=438.5, gt=0.0)  # K


class CstrSeries(BaseModel):
    """Samples every ``sample_period`` minutes.

    ``qc``, ``tc0`` and ``t0`` are the inputs applied from each sample
    instant until the next one.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: NDArray[np.float64]
    ca: NDArray[np.float64]
    temperature: NDArray[np.float64]
    qc: NDArray[np.float64]
    tc0: NDArray[np.float64]
    t0: NDArray[np.float64]
    params: CstrParams

    def states(self) -> list[CstrState]:
        return [CstrState(Ca=float(c), T=float(t)) for c, t in zip(self.ca, self.temperature)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.t,
                "ca": self.ca,
                "temperature": self.temperature,
                "qc": self.qc,
                "tc0": self.tc0,
                "t0": self.t0,
            }
        )


def step_qc_profile(
    levels: tuple[float, ...] | list[float],
    dwell_samples: int = 100,
    sample_period: float = 0.1,
) -> QcStepProfile:
    """Hold each level for ``dwell_samples`` samples, in order."""
    dwell = dwell_samples * sample_period
    return QcStepProfile(
        levels=list(levels),
        switch_times=[dwell * (i + 1) for i in range(len(levels) - 1)],
    )


def training_qc_profile(dwell_samples: int = 100, sample_period: float = 0.1) -> QcStepProfile:
    """103 -> 105 -> 110 -> 100 -> 99 -> 110 l/min."""
    return step_qc_profile(TRAINING_QC_LEVELS, dwell_samples, sample_period)


def validation_qc_profile(dwell_samples: int = 100, sample_period: float = 0.1) -> QcStepProfile:
    """A second excitation realization over the same flow range."""
    return step_qc_profile(VALIDATION_QC_LEVELS, dwell_samples, sample_period)


def _rates(
    p: CstrParams, ca: float, temp: float, qc: float, tc0: float, t0: float
) -> tuple[float, float]:
    reaction = p.k0 * ca * math.exp(-p.E_over_R / temp)
    dilution = p.q / p.V
    coolant = p.k2 * qc * (1.0 - math.exp(-p.k3 / qc)) * (tc0 - temp)
    dca = dilution * (p.Ca0 - ca) - reaction
    dtemp = dilution * (t0 - temp) + (p.k1 / p.k0) * reaction + coolant
    return dca, dtemp


def cstr_simulate(
    params: CstrParams | None = None,
    qc_profile: QcStepProfile | float = NOMINAL_QC,
    disturbance: Tc0Sinusoid | None = None,
    dt: float = 0.01,
    duration: float = 60.0,
    sample_period: float = 0.1,
    initial: CstrState | None = None,
) -> CstrSeries:
    """Integrate the reactor with fixed-step RK4 and sample it.

    The disturbance argument k is the sample index at the start of each step.

    Raises:
        PlantParameterError: On a nonpositive coolant flow or bad step sizes.
        IntegrationError: If the state becomes non-finite or T drops to 0.
    """
    params = params or CstrParams()
    profile = (
        qc_profile
        if isinstance(qc_profile, QcStepProfile)
        else QcStepProfile.constant(float(qc_profile))
    )
    if any(level <= 0.0 for level in profile.levels):
        raise PlantParameterError(f"Coolant flow must be > 0, got levels {profile.levels}")
    if dt <= 0.0 or duration <= 0.0:
        raise PlantParameterError("dt and duration must be > 0")
    stride_f = sample_period / dt
    stride = int(round(stride_f))
    if stride < 1 or abs(stride_f - stride) > 1e-9:
        raise PlantParameterError("sample_period must be a positive multiple of dt")

    state = initial or CstrState()
    ca, temp = state.Ca, state.T
    steps = int(round(duration / dt))

    ca_out, temp_out, qc_out, tc0_out, t0_out = [], [], [], [], []
    for i in range(steps + 1):
        t = i * dt
        k = i // stride
        qc = profile.at(t)
        tc0, t0 = params.Tc0, params.T0
        if disturbance is not None:
            if disturbance.target == "tc0":
                tc0 = disturbance.at(k)
            else:
                t0 = disturbance.at(k)
        if i % stride == 0:
            ca_out.append(ca)
            temp_out.append(temp)
            qc_out.append(qc)
            tc0_out.append(tc0)
            t0_out.append(t0)
        if i == steps:
            break

        k1c, k1t = _rates(params, ca, temp, qc, tc0, t0)
        k2c, k2t = _rates(params, ca + 0.5 * dt * k1c, temp + 0.5 * dt * k1t, qc, tc0, t0)
        k3c, k3t = _rates(params, ca + 0.5 * dt * k2c, temp + 0.5 * dt * k2t, qc, tc0, t0)
        k4c, k4t = _rates(params, ca + dt * k3c, temp + dt * k3t, qc, tc0, t0)
        ca = ca + dt / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        temp = temp + dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        if not (math.isfinite(ca) and math.isfinite(temp)) or temp <= 0.0:
            raise IntegrationError("cstr", (i + 1) * dt)
        # round-off can dip a vanishing concentration just below zero
        ca = max(ca, 0.0)

    log_structured(logger, logging.DEBUG, "Integrated", plant="cstr", steps=steps, samples=len(ca_out))
    n = len(ca_out)
    return CstrSeries(
        t=np.arange(n, dtype=np.float64) * sample_period,
        ca=np.asarray(ca_out),
        temperature=np.asarray(temp_out),
        qc=np.asarray(qc_out),
        tc0=np.asarray(tc0_out),
        t0=np.asarray(t0_out),
        params=params,
    )
