"""
Tests for the norm-based baselines and the regime comparison table.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from _test_env import rng, unit_config

from schatten_bounds.analysis.baselines import (
    METHODS,
    MixedRadii,
    conversion_bounds,
    edelman_factor,
    mixed_radii_from_weights,
    regime_table,
    trauger_factor,
)
from schatten_bounds.analysis.bounds import LayerRadii
from schatten_bounds.analysis.model import TheoryWeights
from schatten_bounds.core.errors import DomainError, InputError


class TestEdelmanTrauger:
    """Tests for the Edelman-type and Trauger-type leading factors."""

    def test_edelman_single_layer_unit_norms(self) -> None:
        mixed = MixedRadii(np.ones((1, 3)), np.ones((1, 3)))
        leading, full = edelman_factor(mixed, LayerRadii.uniform(1), unit_config())
        assert leading == pytest.approx((3.0 + 2.0 ** (2.0 / 3.0)) ** 1.5)
        assert leading == pytest.approx(9.825, abs=1e-3)
        assert full > 0.0

    def test_trauger_single_layer_unit_norms(self) -> None:
        leading, _ = trauger_factor(1.0, LayerRadii.uniform(1), unit_config())
        assert leading == pytest.approx((2.0 + 2.0 ** (2.0 / 3.0)) ** 1.5)
        assert leading == pytest.approx(6.793, abs=2e-3)

    def test_trauger_scales_with_c11(self) -> None:
        radii, cfg = LayerRadii.uniform(2), unit_config(L=2)
        one, _ = trauger_factor(1.0, radii, cfg)
        three, _ = trauger_factor(3.0, radii, cfg)
        assert three == pytest.approx(3.0 * one)

    def test_trauger_needs_uniform_radii(self) -> None:
        radii = LayerRadii.uniform(2)
        radii.spectral[1, 1] = 2.0
        with pytest.raises(DomainError, match="uniform V"):
            trauger_factor(1.0, radii, unit_config(L=2))

    def test_depth_mismatch(self) -> None:
        mixed = MixedRadii(np.ones((2, 3)), np.ones((2, 3)))
        with pytest.raises(InputError, match="cover"):
            edelman_factor(mixed, LayerRadii.uniform(1), unit_config())

    def test_edelman_grows_with_mixed_norms(self) -> None:
        radii, cfg = LayerRadii.uniform(1), unit_config()
        unit = np.ones((1, 3))
        small, _ = edelman_factor(MixedRadii(unit, unit), radii, cfg)
        large, _ = edelman_factor(MixedRadii(4.0 * unit, unit), radii, cfg)
        assert small < large


class TestMixedRadii:
    """Tests for measuring mixed-norm radii from weights."""

    def test_query_key_measured_on_transpose(self) -> None:
        mat = np.array([[3.0, 0.0], [4.0, 0.0]])
        weights = TheoryWeights.from_matrices([(mat, mat, mat)], np.ones(2))
        mixed = mixed_radii_from_weights(weights)
        assert mixed.c21("QK", 1) == pytest.approx(7.0)
        assert mixed.c21("V", 1) == pytest.approx(5.0)
        assert mixed.c11("M", 1) == pytest.approx(7.0)

    def test_negative_radius(self) -> None:
        with pytest.raises(DomainError):
            MixedRadii(-np.ones((1, 3)), np.ones((1, 3)))


class TestConversionBounds:
    """Tests for conversion_bounds."""

    def test_chains_hold(self) -> None:
        gen = rng(0)
        for _ in range(20):
            values = conversion_bounds(gen.standard_normal((6, 6)))
            assert values["mixed21"] <= values["sqrtN_frob"] * (1 + 1e-12)
            assert values["sqrtN_frob"] <= values["sqrtNrank_spec"] * (1 + 1e-12)
            assert values["mixed11"] <= values["N_frob"] * (1 + 1e-12)
            assert values["N_frob"] <= values["Nsqrtrank_spec"] * (1 + 1e-12)

    def test_identity(self) -> None:
        values = conversion_bounds(np.eye(4))
        assert values["mixed21"] == pytest.approx(4.0)
        assert values["sqrtNrank_spec"] == pytest.approx(4.0)

    def test_square_only(self) -> None:
        with pytest.raises(InputError, match="square"):
            conversion_bounds(np.ones((2, 3)))


class TestRegimeTable:
    """Tests for regime_table."""

    @pytest.mark.parametrize(
        ("regime", "method", "symbol"),
        [
            ("rank", "ours", "sqrt(r*L*N)"),
            ("rank", "edelman", "C^L*L^(3/2)*sqrt(r*N)"),
            ("rank", "trauger", "C^L*L^(3/2)*sqrt(r)*N"),
            ("spectral_only", "ours", "sqrt(L)*N"),
            ("frobenius", "ours", "sqrt(C_F)*C^(L/2)*L*N^(3/4)"),
        ],
    )
    def test_symbols(self, regime: str, method: str, symbol: str) -> None:
        table = regime_table(regime, 768, 12, 1.0, r=64, c_f=1.0)
        assert table["symbols"][method] == symbol

    def test_rank_values(self) -> None:
        table = regime_table("rank", 768, 12, 2.0, r=64)
        values = table["values"]
        assert set(values) == set(METHODS)
        assert values["ours"] == pytest.approx(math.sqrt(64 * 12 * 768))
        assert values["edelman"] == pytest.approx(
            2.0**12 * 12**1.5 * math.sqrt(64 * 768)
        )

    def test_ours_smallest_under_spectral_only(self) -> None:
        values = regime_table("spectral_only", 768, 12, 1.0)["values"]
        assert values["ours"] < values["edelman"] < values["trauger"]

    def test_unknown_regime(self) -> None:
        with pytest.raises(DomainError, match="Unknown regime"):
            regime_table("nuclear", 768, 12, 1.0)

    def test_rank_requires_r(self) -> None:
        with pytest.raises(InputError, match="needs r"):
            regime_table("rank", 768, 12, 1.0)

    def test_frobenius_requires_cf(self) -> None:
        with pytest.raises(InputError, match="C_F"):
            regime_table("frobenius", 768, 12, 1.0)

    def test_nonpositive_parameters(self) -> None:
        with pytest.raises(DomainError):
            regime_table("spectral_only", 768, 0, 1.0)
