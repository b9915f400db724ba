"""Tests for t-norms, s-norms, duality and folds."""

import math

import numpy as np
import pytest

from smoothfuzz.exceptions import EmptySequenceError, NormDomainError
from smoothfuzz.norms import (
    ALL_KINDS,
    COMPOSITION_NAMES,
    DUAL_PAIR_KINDS,
    MIN_MAX,
    PRODUCT_SUM,
    SMOOTH_ACOS,
    SMOOTH_ATAN,
    SMOOTH_I,
    SMOOTH_IV,
    SMOOTH_KINDS,
    CompositionKind,
    CompositionTag,
    dual_s_from_t,
    fold_s,
    fold_t,
    s_norm,
    t_norm,
)

_SAMPLES = 10_000


def _unit_samples(seed: int, count: int = _SAMPLES) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    return rng.random(count), rng.random(count), rng.random(count)


def _ids(kinds) -> list[str]:
    return [kind.name for kind in kinds]


# --- CompositionKind ---


class TestCompositionKind:
    def test_parse_canonical_names(self):
        for name in COMPOSITION_NAMES:
            assert CompositionKind.parse(name).name == name

    def test_parse_is_case_insensitive(self):
        assert CompositionKind.parse(" ATAN ") == SMOOTH_ATAN

    def test_parse_unknown_lists_valid_names(self):
        with pytest.raises(ValueError, match="prodsum") as exc_info:
            CompositionKind.parse("lukasiewicz")
        assert "lukasiewicz" in str(exc_info.value)

    def test_beta_must_exceed_one(self):
        with pytest.raises(ValueError):
            CompositionKind(tag=CompositionTag.SMOOTH_I, beta=1.0)

    def test_default_beta(self):
        assert SMOOTH_I.beta == 2.0
        assert str(SMOOTH_I) == "smooth1(beta=2)"

    def test_smooth_flags(self):
        assert not MIN_MAX.is_smooth
        assert not PRODUCT_SUM.is_smooth
        assert set(_ids(SMOOTH_KINDS)) == {"smooth1", "atan", "acos", "smooth4"}

    def test_frozen(self):
        with pytest.raises(Exception):
            SMOOTH_ATAN.beta = 3.0


# --- Worked values ---


class TestWorkedValues:
    def test_product_t(self):
        assert t_norm(PRODUCT_SUM, 0.5, 0.4).value == pytest.approx(0.2)

    def test_atan_boundary(self):
        assert t_norm(SMOOTH_ATAN, 0.7, 1.0).value == pytest.approx(0.7, abs=1e-12)

    def test_atan_midpoint(self):
        expected = (4.0 / math.pi) * math.atan(math.tan(math.pi / 8.0) ** 2)
        value = t_norm(SMOOTH_ATAN, 0.5, 0.5).value
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(0.21636, abs=1e-5)

    def test_max_s(self):
        assert s_norm(MIN_MAX, 0.3, 0.7).value == 0.7

    def test_acos_boundary(self):
        assert s_norm(SMOOTH_ACOS, 0.4, 0.0).value == pytest.approx(0.4, abs=1e-12)

    def test_acos_midpoint(self):
        assert s_norm(SMOOTH_ACOS, 0.5, 0.5).value == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_dual_product_sum(self):
        assert dual_s_from_t(PRODUCT_SUM, 0.5, 0.5).value == pytest.approx(0.75)

    def test_dual_min_max(self):
        assert dual_s_from_t(MIN_MAX, 0.3, 0.7).value == pytest.approx(0.7)

    def test_dual_smooth_i_boundary(self):
        assert dual_s_from_t(SMOOTH_I, 0.2, 0.0).value == pytest.approx(0.2, abs=1e-12)

    def test_scalar_inputs_give_floats(self):
        result = t_norm(SMOOTH_IV, 0.3, 0.6)
        assert isinstance(result.value, float)
        assert isinstance(result.d_da, float)
        assert isinstance(result.d_db, float)


# --- Domain handling ---


class TestDomain:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=_ids(ALL_KINDS))
    def test_out_of_range_rejected(self, kind):
        with pytest.raises(NormDomainError) as exc_info:
            t_norm(kind, 1.1, 0.5)
        assert exc_info.value.value == pytest.approx(1.1)

    def test_negative_rejected(self):
        with pytest.raises(NormDomainError):
            s_norm(SMOOTH_ACOS, 0.5, -0.01)

    def test_nan_rejected(self):
        with pytest.raises(NormDomainError):
            t_norm(PRODUCT_SUM, float("nan"), 0.5)

    def test_tiny_drift_clamped(self):
        assert t_norm(PRODUCT_SUM, 1.0 + 5e-13, 0.5).value == pytest.approx(0.5)
        assert s_norm(PRODUCT_SUM, -5e-13, 0.25).value == pytest.approx(0.25)

    def test_domain_error_is_value_error(self):
        with pytest.raises(ValueError):
            t_norm(MIN_MAX, 2.0, 0.0)


# --- Axioms ---


@pytest.mark.parametrize("kind", ALL_KINDS, ids=_ids(ALL_KINDS))
class TestAxioms:
    def test_commutativity_exact(self, kind):
        a, b, _ = _unit_samples(1)
        assert np.array_equal(t_norm(kind, a, b).value, t_norm(kind, b, a).value)
        assert np.array_equal(s_norm(kind, a, b).value, s_norm(kind, b, a).value)

    def test_associativity(self, kind):
        a, b, c = _unit_samples(2)
        for norm in (t_norm, s_norm):
            left = norm(kind, norm(kind, a, b).value, c).value
            right = norm(kind, a, norm(kind, b, c).value).value
            np.testing.assert_allclose(left, right, rtol=0, atol=1e-9)

    def test_monotonicity(self, kind):
        a, b, c = _unit_samples(3)
        low, high = np.minimum(a, b), np.maximum(a, b)
        assert np.all(t_norm(kind, low, c).value <= t_norm(kind, high, c).value + 1e-12)
        assert np.all(s_norm(kind, low, c).value <= s_norm(kind, high, c).value + 1e-12)

    def test_boundary_axioms(self, kind):
        a, _, _ = _unit_samples(4)
        np.testing.assert_allclose(t_norm(kind, a, 1.0).value, a, rtol=0, atol=1e-12)
        np.testing.assert_allclose(s_norm(kind, a, 0.0).value, a, rtol=0, atol=1e-12)

    def test_range_closure(self, kind):
        grid = np.linspace(0.0, 1.0, 101)
        a, b = np.meshgrid(grid, grid)
        for norm in (t_norm, s_norm):
            result = norm(kind, a, b)
            assert np.all((result.value >= 0.0) & (result.value <= 1.0))
            assert np.all(np.isfinite(result.d_da))
            assert np.all(np.isfinite(result.d_db))


@pytest.mark.parametrize("kind", DUAL_PAIR_KINDS, ids=_ids(DUAL_PAIR_KINDS))
def test_de_morgan_duality(kind):
    a, b, _ = _unit_samples(5)
    np.testing.assert_allclose(
        s_norm(kind, a, b).value, dual_s_from_t(kind, a, b).value, rtol=0, atol=1e-9
    )


def test_smooth_i_s_norm_is_dual_of_its_t_norm():
    a, b, _ = _unit_samples(6, 1000)
    np.testing.assert_allclose(
        s_norm(SMOOTH_I, a, b).value, dual_s_from_t(SMOOTH_I, a, b).value, rtol=0, atol=1e-15
    )


# --- Derivatives ---


@pytest.mark.parametrize("kind", SMOOTH_KINDS + (PRODUCT_SUM,), ids=_ids(SMOOTH_KINDS + (PRODUCT_SUM,)))
class TestDerivatives:
    h = 1e-6

    def _interior(self, seed: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(seed)
        return rng.uniform(0.01, 0.99, 2000), rng.uniform(0.01, 0.99, 2000)

    @pytest.mark.parametrize("norm", [t_norm, s_norm], ids=["t", "s"])
    def test_d_da_matches_central_difference(self, kind, norm):
        a, b = self._interior(7)
        analytic = norm(kind, a, b).d_da
        numeric = (norm(kind, a + self.h, b).value - norm(kind, a - self.h, b).value) / (2 * self.h)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)

    @pytest.mark.parametrize("norm", [t_norm, s_norm], ids=["t", "s"])
    def test_d_db_matches_central_difference(self, kind, norm):
        a, b = self._interior(8)
        analytic = norm(kind, a, b).d_db
        numeric = (norm(kind, a, b + self.h).value - norm(kind, a, b - self.h).value) / (2 * self.h)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)

    def test_dual_partials_match_s_norm_partials(self, kind):
        if kind not in DUAL_PAIR_KINDS:
            pytest.skip("pair is not an exact dual")
        a, b = self._interior(9)
        direct = s_norm(kind, a, b)
        dual = dual_s_from_t(kind, a, b)
        np.testing.assert_allclose(direct.d_da, dual.d_da, rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(direct.d_db, dual.d_db, rtol=1e-7, atol=1e-9)


class TestSmoothness:
    def test_min_derivative_jumps_at_tie(self):
        below = t_norm(MIN_MAX, 0.5 - 1e-9, 0.5).d_da
        above = t_norm(MIN_MAX, 0.5 + 1e-9, 0.5).d_da
        assert below - above == 1.0

    def test_min_tie_uses_half(self):
        assert t_norm(MIN_MAX, 0.4, 0.4).d_da == 0.5
        assert s_norm(MIN_MAX, 0.4, 0.4).d_db == 0.5

    @pytest.mark.parametrize("kind", SMOOTH_KINDS, ids=_ids(SMOOTH_KINDS))
    def test_second_derivative_bounded_across_tie(self, kind):
        h = 1e-4
        for b in (0.2, 0.5, 0.8):
            slope = (t_norm(kind, b + h, b).d_da - t_norm(kind, b - h, b).d_da) / (2 * h)
            assert abs(slope) < 50.0


# --- Folds ---


class TestFolds:
    def test_fold_product(self):
        assert fold_t(PRODUCT_SUM, [0.5, 0.5, 0.5]) == pytest.approx(0.125)

    def test_fold_min(self):
        assert fold_t(MIN_MAX, [0.9, 0.2, 0.6]) == 0.2

    def test_fold_singleton(self):
        assert fold_t(SMOOTH_ATAN, [0.37]) == pytest.approx(0.37)

    def test_fold_s_probabilistic(self):
        assert fold_s(PRODUCT_SUM, [0.5, 0.5]) == pytest.approx(0.75)

    def test_fold_empty_raises(self):
        with pytest.raises(EmptySequenceError):
            fold_t(PRODUCT_SUM, [])
        with pytest.raises(EmptySequenceError):
            fold_s(MIN_MAX, [])

    def test_fold_over_last_axis(self):
        rows = np.array([[0.5, 0.5], [1.0, 0.3]])
        np.testing.assert_allclose(fold_t(PRODUCT_SUM, rows), [0.25, 0.3])

    def test_fold_order_immaterial(self):
        values = [0.3, 0.8, 0.55, 0.9]
        forward = fold_t(SMOOTH_IV, values)
        backward = fold_t(SMOOTH_IV, values[::-1])
        assert forward == pytest.approx(backward, abs=1e-9)
