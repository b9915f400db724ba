"""Rule-based fuzzy model: fuzzification, rule strength, centroid output.

Rule i fires with strength

    y'_i = S(T(x'_i1, c_i), T(x'_i2, c_i), ..., T(x'_in, c_i))

(a left fold of the s-norm over per-input terms) and the model output is
the strength-weighted mean of the consequent centers d_i.

Note that with c_i = 1 the s-norm makes the firing disjunctive: one
well-matched input is enough to fire a rule.

Parameters are held in normalized coordinates. ``Scaling`` maps raw inputs
and outputs in and out, so public functions accept and return raw units.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from smoothfuzz.exceptions import (
    ArityMismatchError,
    DegenerateDenominatorError,
    ModelFileError,
    ModelVersionError,
)
from smoothfuzz.membership import GaussianMF, gaussian
from smoothfuzz.norms import PRODUCT_SUM, CompositionKind, s_norm, t_norm

FORMAT_VERSION = 1

# Defuzzification refuses sums of strengths at or below this.
DENOMINATOR_EPSILON = 1e-300


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


class Rule(BaseModel):
    """IF x_1 is M_1 AND ... x_n is M_n THEN y is d (with confidence c)."""

    model_config = ConfigDict(frozen=True)

    antecedents: list[GaussianMF] = Field(min_length=1)
    consequent_center: float
    confidence: float = Field(default=1.0, gt=0.0, le=1.0)


class Scaling(BaseModel):
    """Min-max normalization of inputs and output.

    ``normalized = (raw - low) / span``; spans are strictly positive.
    """

    model_config = ConfigDict(frozen=True)

    input_low: list[float]
    input_span: list[float]
    output_low: float = 0.0
    output_span: float = Field(default=1.0, gt=0.0)

    @field_validator("input_span")
    @classmethod
    def _positive_spans(cls, v: list[float]) -> list[float]:
        if any(s <= 0.0 for s in v):
            raise ValueError("input spans must be > 0")
        return v

    @model_validator(mode="after")
    def _matching_lengths(self) -> Scaling:
        if len(self.input_low) != len(self.input_span):
            raise ValueError("input_low and input_span lengths differ")
        return self

    @classmethod
    def identity(cls, arity: int) -> Scaling:
        return cls(input_low=[0.0] * arity, input_span=[1.0] * arity)

    @classmethod
    def fit(cls, inputs: ArrayLike, targets: ArrayLike) -> Scaling:
        """Fit to the observed ranges; a constant column gets span 1."""
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        y = np.asarray(targets, dtype=np.float64)
        x_low, x_span = x.min(axis=0), np.ptp(x, axis=0)
        y_low, y_span = float(y.min()), float(np.ptp(y))
        return cls(
            input_low=[float(v) for v in x_low],
            input_span=[float(s) if s > 0.0 else 1.0 for s in x_span],
            output_low=y_low,
            output_span=y_span if y_span > 0.0 else 1.0,
        )

    @property
    def is_identity(self) -> bool:
        return (
            all(v == 0.0 for v in self.input_low)
            and all(s == 1.0 for s in self.input_span)
            and self.output_low == 0.0
            and self.output_span == 1.0
        )

    def to_internal_inputs(self, x: ArrayLike) -> NDArray[np.float64]:
        return (np.asarray(x, dtype=np.float64) - self.input_low) / self.input_span

    def to_internal_output(self, y: ArrayLike) -> NDArray[np.float64]:
        return (np.asarray(y, dtype=np.float64) - self.output_low) / self.output_span

    def to_raw_output(self, y: ArrayLike) -> NDArray[np.float64]:
        return np.asarray(y, dtype=np.float64) * self.output_span + self.output_low


@dataclass(frozen=True, slots=True)
class FiringRecord:
    """Intermediates of one prediction, kept for the gradient chain.

    ``memberships`` is r x n, ``strengths`` has length r, ``output`` is the
    raw-unit prediction and ``internal_output`` the same in model units.
    """

    memberships: NDArray[np.float64]
    strengths: NDArray[np.float64]
    output: float
    internal_output: float
    strength_total: float


# ---------------------------------------------------------------------------
# FuzzyModel
# ---------------------------------------------------------------------------


def _frozen(values: ArrayLike, shape: tuple[int, ...] | None = None) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"Expected shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


class FuzzyModel:
    """r rules over n inputs with Gaussian antecedents.

    Parameter arrays are read-only; training produces new models through
    ``replace()``, so a model can be shared by concurrent predictions.
    """

    def __init__(
        self,
        centers: ArrayLike,
        spreads: ArrayLike,
        consequents: ArrayLike,
        confidences: ArrayLike | None = None,
        composition: CompositionKind = PRODUCT_SUM,
        scaling: Scaling | None = None,
    ) -> None:
        centers_arr = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        if centers_arr.size == 0:
            raise ValueError("A model needs at least one rule and one input")
        r, n = centers_arr.shape
        self._centers = _frozen(centers_arr)
        self._spreads = _frozen(spreads, (r, n))
        if np.any(self._spreads <= 0.0):
            raise ValueError("All spreads must be > 0")
        self._consequents = _frozen(consequents, (r,))
        self._confidences = _frozen(
            np.ones(r) if confidences is None else confidences, (r,)
        )
        if np.any(self._confidences <= 0.0) or np.any(self._confidences > 1.0):
            raise ValueError("Confidences must lie in (0, 1]")
        self._composition = composition
        self._scaling = scaling if scaling is not None else Scaling.identity(n)
        if len(self._scaling.input_low) != n:
            raise ArityMismatchError(n, len(self._scaling.input_low))

    # --- accessors ---

    @property
    def centers(self) -> NDArray[np.float64]:
        return self._centers

    @property
    def spreads(self) -> NDArray[np.float64]:
        return self._spreads

    @property
    def consequents(self) -> NDArray[np.float64]:
        return self._consequents

    @property
    def confidences(self) -> NDArray[np.float64]:
        return self._confidences

    @property
    def composition(self) -> CompositionKind:
        return self._composition

    @property
    def scaling(self) -> Scaling:
        return self._scaling

    @property
    def input_arity(self) -> int:
        return self._centers.shape[1]

    @property
    def rule_count(self) -> int:
        return self._centers.shape[0]

    @property
    def rules(self) -> list[Rule]:
        return [
            Rule(
                antecedents=[
                    GaussianMF(center=float(c), spread=float(s))
                    for c, s in zip(self._centers[i], self._spreads[i])
                ],
                consequent_center=float(self._consequents[i]),
                confidence=float(self._confidences[i]),
            )
            for i in range(self.rule_count)
        ]

    # --- construction ---

    @classmethod
    def from_rules(
        cls,
        rules: Sequence[Rule],
        composition: CompositionKind = PRODUCT_SUM,
        scaling: Scaling | None = None,
    ) -> FuzzyModel:
        if not rules:
            raise ValueError("A model needs at least one rule")
        arity = len(rules[0].antecedents)
        for rule in rules:
            if len(rule.antecedents) != arity:
                raise ArityMismatchError(arity, len(rule.antecedents))
        return cls(
            centers=[[mf.center for mf in rule.antecedents] for rule in rules],
            spreads=[[mf.spread for mf in rule.antecedents] for rule in rules],
            consequents=[rule.consequent_center for rule in rules],
            confidences=[rule.confidence for rule in rules],
            composition=composition,
            scaling=scaling,
        )

    def replace(
        self,
        *,
        centers: ArrayLike | None = None,
        spreads: ArrayLike | None = None,
        consequents: ArrayLike | None = None,
        composition: CompositionKind | None = None,
    ) -> FuzzyModel:
        """Return a new model with the given parameters swapped in."""
        return FuzzyModel(
            centers=self._centers if centers is None else centers,
            spreads=self._spreads if spreads is None else spreads,
            consequents=self._consequents if consequents is None else consequents,
            confidences=self._confidences,
            composition=self._composition if composition is None else composition,
            scaling=self._scaling,
        )

    def copy(self) -> FuzzyModel:
        """Snapshot for a concurrent reader or a private trainer."""
        return self.replace()

    def parameters_equal(self, other: FuzzyModel) -> bool:
        """Bit-exact comparison of every parameter."""
        return (
            self._composition == other._composition
            and self._scaling == other._scaling
            and np.array_equal(self._centers, other._centers)
            and np.array_equal(self._spreads, other._spreads)
            and np.array_equal(self._consequents, other._consequents)
            and np.array_equal(self._confidences, other._confidences)
        )

    def __repr__(self) -> str:
        return (
            f"FuzzyModel(rules={self.rule_count}, inputs={self.input_arity}, "
            f"composition={self._composition})"
        )


def grid_model(
    centers_per_input: Sequence[Sequence[float]],
    spreads_per_input: Sequence[float],
    consequents: ArrayLike,
    composition: CompositionKind = PRODUCT_SUM,
    scaling: Scaling | None = None,
) -> FuzzyModel:
    """Build the full grid rule base: one rule per combination of MFs.

    With M functions on each of n inputs this yields M^n rules; rule order is
    lexicographic in the per-input MF indices (last input varies fastest).
    """
    combos = list(itertools.product(*[range(len(c)) for c in centers_per_input]))
    centers = [[centers_per_input[j][m] for j, m in enumerate(combo)] for combo in combos]
    spreads = [[spreads_per_input[j] for j in range(len(combo))] for combo in combos]
    return FuzzyModel(
        centers=centers,
        spreads=spreads,
        consequents=consequents,
        composition=composition,
        scaling=scaling,
    )


# ---------------------------------------------------------------------------
# Inference kernels (internal coordinates, vectorized over leading axes)
# ---------------------------------------------------------------------------


def _check_arity(model: FuzzyModel, x: NDArray[np.float64]) -> None:
    if x.shape[-1] != model.input_arity:
        raise ArityMismatchError(model.input_arity, x.shape[-1])


def memberships_internal(model: FuzzyModel, x_internal: ArrayLike) -> NDArray[np.float64]:
    """Membership table of already-normalized input(s): (..., r, n)."""
    x = np.asarray(x_internal, dtype=np.float64)
    return gaussian(x[..., np.newaxis, :], model.centers, model.spreads)


def fold_strengths(
    composition: CompositionKind,
    memberships: NDArray[np.float64],
    confidences: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Rule strengths for a (..., r, n) membership table."""
    terms = np.asarray(t_norm(composition, memberships, confidences[:, np.newaxis]).value)
    acc = terms[..., 0]
    for j in range(1, terms.shape[-1]):
        acc = np.asarray(s_norm(composition, acc, terms[..., j]).value)
    return acc


def fold_strengths_with_grad(
    composition: CompositionKind,
    memberships: NDArray[np.float64],
    confidences: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Rule strengths and d strength / d membership, both for a (..., r, n) table.

    The derivative is the exact one of the left fold
    P_0 = A_0, P_s = S(P_{s-1}, A_s): for input j it is dT/da at (x'_j, c)
    times dS/db at step j (step 0 has none) times the product of dS/da over
    every later step.
    """
    term = t_norm(composition, memberships, confidences[..., np.newaxis])
    terms = np.asarray(term.value)
    n = terms.shape[-1]
    acc = terms[..., 0]
    lead = np.ones_like(terms)
    carry = np.ones_like(terms)
    for s in range(1, n):
        step = s_norm(composition, acc, terms[..., s])
        carry[..., s - 1] = step.d_da
        lead[..., s] = step.d_db
        acc = np.asarray(step.value)
    # tail[j] = product of dS/da over steps j+1 .. n-1; carry[..., n-1] stays 1
    tail = np.flip(np.cumprod(np.flip(carry, axis=-1), axis=-1), axis=-1)
    grads = tail * lead * np.asarray(term.d_da)
    return acc, grads


def defuzzify(strengths: ArrayLike, centers: ArrayLike) -> float:
    """Centroid output sum(d_i y'_i) / sum(y'_i).

    Raises:
        DegenerateDenominatorError: If the strengths sum to at most 1e-300.
    """
    w = np.asarray(strengths, dtype=np.float64)
    d = np.asarray(centers, dtype=np.float64)
    total = float(w.sum())
    if not total > DENOMINATOR_EPSILON:
        raise DegenerateDenominatorError(total)
    return float(np.dot(w, d) / total)


# ---------------------------------------------------------------------------
# Public operations (raw units)
# ---------------------------------------------------------------------------


def _as_input(model: FuzzyModel, x: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    _check_arity(model, arr)
    return arr


def fuzzify(model: FuzzyModel, x: ArrayLike) -> NDArray[np.float64]:
    """r x n table of mu_ij(x_j).

    Raises:
        ArityMismatchError: If ``len(x)`` differs from the model's arity.
    """
    arr = _as_input(model, x)
    return memberships_internal(model, model.scaling.to_internal_inputs(arr))


def _row(model: FuzzyModel, rule_index: int, membership_row: ArrayLike) -> NDArray[np.float64]:
    row = np.asarray(membership_row, dtype=np.float64).reshape(-1)
    _check_arity(model, row)
    if not 0 <= rule_index < model.rule_count:
        raise IndexError(f"Rule index {rule_index} out of range for {model.rule_count} rules")
    return row


def rule_strength(model: FuzzyModel, rule_index: int, membership_row: ArrayLike) -> float:
    """Strength y'_i of one rule for its membership row."""
    row = _row(model, rule_index, membership_row)
    conf = model.confidences[rule_index : rule_index + 1]
    return float(fold_strengths(model.composition, row[np.newaxis, :], conf)[0])


def rule_strength_grad(
    model: FuzzyModel, rule_index: int, membership_row: ArrayLike
) -> NDArray[np.float64]:
    """d y'_i / d x'_ij for every input j."""
    row = _row(model, rule_index, membership_row)
    conf = model.confidences[rule_index : rule_index + 1]
    _, grads = fold_strengths_with_grad(model.composition, row[np.newaxis, :], conf)
    return grads[0]


def predict(model: FuzzyModel, x: ArrayLike) -> tuple[float, FiringRecord]:
    """Model output for one input vector, plus the intermediates.

    Raises:
        ArityMismatchError: On a wrong-length input.
        DegenerateDenominatorError: If no rule fires at all.
    """
    table = fuzzify(model, x)
    strengths = fold_strengths(model.composition, table, model.confidences)
    internal = defuzzify(strengths, model.consequents)
    output = float(model.scaling.to_raw_output(internal))
    return output, FiringRecord(
        memberships=table,
        strengths=strengths,
        output=output,
        internal_output=internal,
        strength_total=float(strengths.sum()),
    )


def predict_batch(model: FuzzyModel, inputs: ArrayLike) -> NDArray[np.float64]:
    """Raw-unit predictions for an (N, n) input array."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    _check_arity(model, x)
    table = memberships_internal(model, model.scaling.to_internal_inputs(x))
    strengths = fold_strengths(model.composition, table, model.confidences)
    totals = strengths.sum(axis=-1)
    if not np.all(totals > DENOMINATOR_EPSILON):
        raise DegenerateDenominatorError(float(totals.min()))
    internal = strengths @ model.consequents / totals
    return model.scaling.to_raw_output(internal)


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------


class ModelFile(BaseModel):
    """On-disk schema of a model (JSON text, versioned)."""

    format_version: int
    composition: str
    beta: float = Field(default=2.0, gt=1.0)
    input_arity: int = Field(ge=1)
    rules: list[Rule] = Field(min_length=1)
    scaling: Scaling | None = None

    @field_validator("composition")
    @classmethod
    def _known_composition(cls, v: str) -> str:
        CompositionKind.parse(v)
        return v

    @model_validator(mode="after")
    def _consistent_arity(self) -> ModelFile:
        for i, rule in enumerate(self.rules):
            if len(rule.antecedents) != self.input_arity:
                raise ValueError(
                    f"rule {i} has {len(rule.antecedents)} antecedents, "
                    f"input_arity is {self.input_arity}"
                )
        if self.scaling is not None and len(self.scaling.input_low) != self.input_arity:
            raise ValueError("scaling arity differs from input_arity")
        return self


def save_model(model: FuzzyModel) -> bytes:
    """Serialize to versioned, indented JSON text.

    Floats are written with Python's shortest round-trip representation, so
    ``load_model(save_model(m))`` reproduces every parameter bit-exactly.
    """
    document = ModelFile(
        format_version=FORMAT_VERSION,
        composition=model.composition.name,
        beta=model.composition.beta,
        input_arity=model.input_arity,
        rules=model.rules,
        scaling=None if model.scaling.is_identity else model.scaling,
    )
    return (document.model_dump_json(indent=2) + "\n").encode("utf-8")


def _field_path(loc: tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc)


def load_model(stream: bytes | str) -> FuzzyModel:
    """Parse a model file produced by ``save_model``.

    Raises:
        ModelFileError: On malformed JSON (with line number) or an invalid
            field (with its dotted path).
        ModelVersionError: On an unsupported ``format_version``.
    """
    try:
        text = stream.decode("utf-8") if isinstance(stream, bytes) else stream
    except UnicodeDecodeError as e:
        raise ModelFileError(f"Model file is not UTF-8 text: {e.reason} at byte {e.start}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"Malformed model file: {e.msg}", line=e.lineno) from e
    if not isinstance(data, dict):
        raise ModelFileError("Model file must contain a JSON object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(version, FORMAT_VERSION)
    try:
        document = ModelFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ModelFileError(
            f"Invalid model file: {first['msg']}", field=_field_path(first["loc"]) or None
        ) from e
    composition = CompositionKind.parse(document.composition, beta=document.beta)
    return FuzzyModel.from_rules(document.rules, composition, document.scaling)
