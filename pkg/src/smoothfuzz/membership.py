"""Gaussian membership functions and their parameter gradients."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

# Spreads never drop below this fraction of the observed input range.
SPREAD_FLOOR_FRACTION = 1e-4


class GaussianMF(BaseModel):
    """mu(x) = exp(-1/2 ((x - center) / spread)^2)."""

    model_config = ConfigDict(frozen=True)

    center: float
    spread: float = Field(gt=0.0)


# ---------------------------------------------------------------------------
# Array kernels (shared with the model and the trainer)
# ---------------------------------------------------------------------------


def gaussian(x: ArrayLike, center: ArrayLike, spread: ArrayLike) -> NDArray[np.float64]:
    z = (np.asarray(x, dtype=np.float64) - center) / spread
    return np.exp(-0.5 * z * z)


def gaussian_grads(
    x: ArrayLike, center: ArrayLike, spread: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Return (mu, dmu/dcenter, dmu/dspread), broadcasting all arguments."""
    diff = np.asarray(x, dtype=np.float64) - center
    spread = np.asarray(spread, dtype=np.float64)
    z = diff / spread
    value = np.exp(-0.5 * z * z)
    d_center = value * diff / (spread * spread)
    d_spread = value * diff * diff / (spread * spread * spread)
    return value, d_center, d_spread


def clamp_spread(spread: ArrayLike, input_range: ArrayLike = 1.0) -> NDArray[np.float64]:
    """Apply the spread floor ``SPREAD_FLOOR_FRACTION * input_range``."""
    floor = SPREAD_FLOOR_FRACTION * np.asarray(input_range, dtype=np.float64)
    return np.maximum(np.asarray(spread, dtype=np.float64), floor)


# ---------------------------------------------------------------------------
# Per-function operations
# ---------------------------------------------------------------------------


def mu(mf: GaussianMF, x: float) -> float:
    """Membership degree of *x*; equals 1 exactly at the center."""
    return float(gaussian(x, mf.center, mf.spread))


def dmu_dc(mf: GaussianMF, x: float) -> float:
    """d mu / d center = mu(x) (x - c) / spread^2."""
    return float(gaussian_grads(x, mf.center, mf.spread)[1])


def dmu_ddelta(mf: GaussianMF, x: float) -> float:
    """d mu / d spread = mu(x) (x - c)^2 / spread^3, never negative."""
    return float(gaussian_grads(x, mf.center, mf.spread)[2])
