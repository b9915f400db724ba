"""Fuzzy compositions: t-norms, s-norms and their first partial derivatives.

Every composition is a named (S, T) pair. Each norm returns a ``NormEval``
carrying the value and both partials so the training chain rule never has
to differentiate numerically.

All functions accept scalars or numpy arrays (broadcast together) and are
pure, so they are safe to call from any number of threads.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from enum import Enum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

from smoothfuzz.exceptions import EmptySequenceError, NormDomainError

# Arguments this far outside [0, 1] are clamped, farther ones are rejected.
DOMAIN_TOLERANCE = 1e-12

# Cap on 1/sqrt(1 - a^2) where SmoothIV's t-norm slope is unbounded at a = 1.
_SLOPE_FLOOR = 1e-6

_K = 2.0 / np.pi
_QUARTER_PI = np.pi / 4.0
_HALF_PI = np.pi / 2.0

Real = float | NDArray[np.float64]


# ---------------------------------------------------------------------------
# Composition kinds
# ---------------------------------------------------------------------------


class CompositionTag(str, Enum):
    """Canonical lowercase names used by the CLI and model files."""

    MIN_MAX = "minmax"
    PRODUCT_SUM = "prodsum"
    SMOOTH_I = "smooth1"
    SMOOTH_ATAN = "atan"
    SMOOTH_ACOS = "acos"
    SMOOTH_IV = "smooth4"


COMPOSITION_NAMES: tuple[str, ...] = tuple(tag.value for tag in CompositionTag)


class CompositionKind(BaseModel):
    """One (s-norm, t-norm) pair.

    ``beta`` only matters for ``smooth1``; its s-norm is built as the dual of
    its t-norm, so beta is carried for the record and the model file.
    """

    model_config = ConfigDict(frozen=True)

    tag: CompositionTag
    beta: float = Field(default=2.0, gt=1.0)

    @property
    def name(self) -> str:
        return self.tag.value

    @property
    def is_smooth(self) -> bool:
        return self.tag not in (CompositionTag.MIN_MAX, CompositionTag.PRODUCT_SUM)

    @classmethod
    def parse(cls, name: str, beta: float = 2.0) -> CompositionKind:
        """Resolve a canonical name such as ``"atan"``.

        Raises:
            ValueError: On an unknown name; the message lists valid names.
        """
        try:
            tag = CompositionTag(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"Unknown composition '{name}'. Valid names: {', '.join(COMPOSITION_NAMES)}"
            ) from None
        return cls(tag=tag, beta=beta)

    def __str__(self) -> str:
        if self.tag is CompositionTag.SMOOTH_I:
            return f"{self.name}(beta={self.beta:g})"
        return self.name


MIN_MAX = CompositionKind(tag=CompositionTag.MIN_MAX)
PRODUCT_SUM = CompositionKind(tag=CompositionTag.PRODUCT_SUM)
SMOOTH_I = CompositionKind(tag=CompositionTag.SMOOTH_I)
SMOOTH_ATAN = CompositionKind(tag=CompositionTag.SMOOTH_ATAN)
SMOOTH_ACOS = CompositionKind(tag=CompositionTag.SMOOTH_ACOS)
SMOOTH_IV = CompositionKind(tag=CompositionTag.SMOOTH_IV)

ALL_KINDS: tuple[CompositionKind, ...] = (
    MIN_MAX,
    PRODUCT_SUM,
    SMOOTH_I,
    SMOOTH_ATAN,
    SMOOTH_ACOS,
    SMOOTH_IV,
)
SMOOTH_KINDS: tuple[CompositionKind, ...] = tuple(k for k in ALL_KINDS if k.is_smooth)

# Pairs whose printed S and T are exact De Morgan duals.
DUAL_PAIR_KINDS: tuple[CompositionKind, ...] = (MIN_MAX, PRODUCT_SUM, SMOOTH_ATAN, SMOOTH_ACOS)


class NormEval(NamedTuple):
    """Norm value with partials with respect to the first and second argument."""

    value: Real
    d_da: Real
    d_db: Real


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------


def _unit(x: ArrayLike) -> NDArray[np.float64]:
    """Validate and clamp a norm argument to [0, 1]."""
    arr = np.asarray(x, dtype=np.float64)
    low = arr < -DOMAIN_TOLERANCE
    high = arr > 1.0 + DOMAIN_TOLERANCE
    bad = low | high | np.isnan(arr)
    if bad.any():
        raise NormDomainError(float(arr[bad].flat[0]))
    return np.clip(arr, 0.0, 1.0)


def _finish(value, d_da, d_db, scalar: bool) -> NormEval:
    value = np.clip(value, 0.0, 1.0)
    if scalar:
        return NormEval(float(value), float(d_da), float(d_db))
    return NormEval(value, d_da, d_db)


def _reflect(fn: Callable[[NDArray, NDArray], tuple]) -> Callable[[NDArray, NDArray], tuple]:
    """Build N(a, b) = 1 - fn(1 - a, 1 - b); partials carry over unchanged."""

    def dual(a: NDArray, b: NDArray) -> tuple:
        value, d_da, d_db = fn(1.0 - a, 1.0 - b)
        return 1.0 - value, d_da, d_db

    return dual


# --- classical ---


def _t_min(a, b):
    d_da = np.where(a < b, 1.0, np.where(a > b, 0.0, 0.5))
    d_db = np.where(b < a, 1.0, np.where(b > a, 0.0, 0.5))
    return np.minimum(a, b), d_da, d_db


def _s_max(a, b):
    d_da = np.where(a > b, 1.0, np.where(a < b, 0.0, 0.5))
    d_db = np.where(b > a, 1.0, np.where(b < a, 0.0, 0.5))
    return np.maximum(a, b), d_da, d_db


def _t_product(a, b):
    return a * b, b, a


def _s_probabilistic(a, b):
    return a + b - a * b, 1.0 - b, 1.0 - a


# --- smooth I: T = 1 - cos((2/pi) acos(1 - a) acos(1 - b)) ---


def _t_smooth_i(a, b):
    sa = np.sqrt(a * (2.0 - a))
    sb = np.sqrt(b * (2.0 - b))
    big_a = np.arctan2(sa, 1.0 - a)
    big_b = np.arctan2(sb, 1.0 - b)
    z = _K * (big_a * big_b)
    value = 2.0 * np.sin(0.5 * z) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        d_da = np.where(sa > 0.0, np.sin(z) * _K * big_b / sa, (_K * big_b) ** 2)
        d_db = np.where(sb > 0.0, np.sin(z) * _K * big_a / sb, (_K * big_a) ** 2)
    return value, d_da, d_db


# --- smooth II ("atan") ---


def _t_atan(a, b):
    ta = np.tan(_QUARTER_PI * a)
    tb = np.tan(_QUARTER_PI * b)
    p = ta * tb
    denom = 1.0 + p * p
    value = np.arctan(p) / _QUARTER_PI
    return value, tb * (1.0 + ta * ta) / denom, ta * (1.0 + tb * tb) / denom


# --- smooth III ("acos"): S = (2/pi) acos(cos(pi a / 2) cos(pi b / 2)) ---


def _s_acos(a, b):
    sa, ca = np.sin(_HALF_PI * a), np.cos(_HALF_PI * a)
    sb, cb = np.sin(_HALF_PI * b), np.cos(_HALF_PI * b)
    # 1 - (ca cb)^2 = sa^2 + sb^2 - sa^2 sb^2, symmetric and free of cancellation
    root = np.sqrt(sa * sa + sb * sb - (sa * sa) * (sb * sb))
    value = np.arctan2(root, ca * cb) / _HALF_PI
    with np.errstate(divide="ignore", invalid="ignore"):
        # at the origin the axis-wise partials both equal 1 (S(a, 0) = a)
        d_da = np.where(root > 0.0, sa * cb / root, 1.0)
        d_db = np.where(root > 0.0, sb * ca / root, 1.0)
    return value, d_da, d_db


# --- smooth IV ---


def _acos_parts(a):
    """Return (acos(a), sqrt(1 - a^2)) computed stably."""
    s = np.sqrt((1.0 - a) * (1.0 + a))
    return np.arctan2(s, a), s


def _s_smooth_iv(a, b):
    big_a, sa = _acos_parts(a)
    big_b, sb = _acos_parts(b)
    z = _K * (big_a * big_b)
    value = np.cos(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_da = np.where(sa > 0.0, np.sin(z) * _K * big_b / sa, (_K * big_b) ** 2)
        d_db = np.where(sb > 0.0, np.sin(z) * _K * big_a / sb, (_K * big_a) ** 2)
    return value, d_da, d_db


def _t_smooth_iv_partial(big_a, sa, big_b, sb):
    # dT/da = sin(cA + B) c / sin(A) with c = 1 - (2/pi) B, split so the
    # sin(cA)/sin(A) -> c limit at a = 1 stays exact.
    c = 1.0 - _K * big_b
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sa > 0.0, np.sin(c * big_a) / sa, c)
    tail = np.cos(c * big_a) * np.sin(big_b) / np.maximum(sa, _SLOPE_FLOOR)
    return c * (ratio * np.cos(big_b) + tail)


def _t_smooth_iv(a, b):
    big_a, sa = _acos_parts(a)
    big_b, sb = _acos_parts(b)
    value = np.cos(big_a + big_b - _K * (big_a * big_b))
    d_da = _t_smooth_iv_partial(big_a, sa, big_b, sb)
    d_db = _t_smooth_iv_partial(big_b, sb, big_a, sa)
    return value, d_da, d_db


_T_NORMS: dict[CompositionTag, Callable] = {
    CompositionTag.MIN_MAX: _t_min,
    CompositionTag.PRODUCT_SUM: _t_product,
    CompositionTag.SMOOTH_I: _t_smooth_i,
    CompositionTag.SMOOTH_ATAN: _t_atan,
    CompositionTag.SMOOTH_ACOS: _reflect(_s_acos),
    CompositionTag.SMOOTH_IV: _t_smooth_iv,
}

_S_NORMS: dict[CompositionTag, Callable] = {
    CompositionTag.MIN_MAX: _s_max,
    CompositionTag.PRODUCT_SUM: _s_probabilistic,
    CompositionTag.SMOOTH_I: _reflect(_t_smooth_i),
    CompositionTag.SMOOTH_ATAN: _reflect(_t_atan),
    CompositionTag.SMOOTH_ACOS: _s_acos,
    CompositionTag.SMOOTH_IV: _s_smooth_iv,
}


def _evaluate(table: dict, kind: CompositionKind, a: ArrayLike, b: ArrayLike) -> NormEval:
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    ua, ub = np.broadcast_arrays(_unit(a), _unit(b))
    value, d_da, d_db = table[kind.tag](ua, ub)
    return _finish(value, d_da, d_db, scalar)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def t_norm(kind: CompositionKind, a: ArrayLike, b: ArrayLike) -> NormEval:
    """Evaluate the t-norm of *kind* and its partials.

    Raises:
        NormDomainError: If an argument lies outside [0, 1] by more than 1e-12.
    """
    return _evaluate(_T_NORMS, kind, a, b)


def s_norm(kind: CompositionKind, a: ArrayLike, b: ArrayLike) -> NormEval:
    """Evaluate the s-norm of *kind* and its partials.

    Raises:
        NormDomainError: If an argument lies outside [0, 1] by more than 1e-12.
    """
    return _evaluate(_S_NORMS, kind, a, b)


def dual_s_from_t(kind: CompositionKind, a: ArrayLike, b: ArrayLike) -> NormEval:
    """Return S(a, b) = 1 - T(1 - a, 1 - b) built from the t-norm of *kind*."""
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    ua, ub = np.broadcast_arrays(_unit(a), _unit(b))
    value, d_da, d_db = _reflect(_T_NORMS[kind.tag])(ua, ub)
    return _finish(value, d_da, d_db, scalar)


def _fold(norm: Callable, kind: CompositionKind, values: ArrayLike | Sequence[float]) -> Real:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise EmptySequenceError("Cannot fold an empty sequence")
    acc = _unit(arr[..., 0])
    for j in range(1, arr.shape[-1]):
        acc = np.asarray(norm(kind, acc, arr[..., j]).value)
    if acc.ndim == 0:
        return float(acc)
    return acc


def fold_t(kind: CompositionKind, values: ArrayLike | Sequence[float]) -> Real:
    """Left-fold the t-norm over the last axis of *values*.

    Associativity makes the fold order immaterial up to rounding.

    Raises:
        EmptySequenceError: If there is nothing to fold.
    """
    return _fold(t_norm, kind, values)


def fold_s(kind: CompositionKind, values: ArrayLike | Sequence[float]) -> Real:
    """Left-fold the s-norm over the last axis of *values*."""
    return _fold(s_norm, kind, values)
