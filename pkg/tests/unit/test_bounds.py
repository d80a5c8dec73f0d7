"""
Tests for the fixed-index bound formulas and their building blocks.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from _test_env import unit_config
from pydantic import ValidationError

from schatten_bounds.analysis.bounds import (
    BoundConfig,
    LayerRadii,
    allocate_radii,
    beta_factor,
    common_index,
    dudley_complexity,
    dudley_entropy_integral,
    gamma_factor,
    gap_bound_common_p,
    gap_bound_dudley,
    gap_bound_general_p,
    propagation_alpha,
)
from schatten_bounds.core.errors import DomainError, InputError


class TestBoundConfig:
    """Tests for BoundConfig validation."""

    def test_defaults(self) -> None:
        cfg = BoundConfig()
        assert (cfg.n, cfg.T, cfg.N, cfg.L) == (10000, 512, 768, 12)
        assert cfg.act_lipschitz == 1.13

    def test_small_sample_rejected(self) -> None:
        with pytest.raises(ValidationError):
            BoundConfig(n=2)

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_delta_open_interval(self, delta: float) -> None:
        with pytest.raises(ValidationError):
            BoundConfig(delta=delta)

    def test_unknown_field_rejected(self) -> None:
        with pytest.raises(ValidationError):
            BoundConfig(width=8)

    def test_frozen(self) -> None:
        cfg = BoundConfig()
        with pytest.raises(ValidationError):
            cfg.n = 5


class TestLayerRadii:
    """Tests for LayerRadii construction."""

    def test_uniform(self) -> None:
        radii = LayerRadii.uniform(2, spectral=3.0, schatten=4.0, p=1.0)
        assert radii.depth == 2
        assert radii.c2("V", 2) == 3.0
        assert radii.cs("M", 1) == 4.0
        assert radii.p("QK", 1) == 1.0
        assert radii.entries()[:3] == [(1, "QK"), (1, "V"), (1, "M")]

    def test_bad_shape(self) -> None:
        with pytest.raises(InputError, match=r"\(L, 3\)"):
            LayerRadii(np.ones((2, 2)), np.ones((2, 2)), np.zeros((2, 2)))

    def test_nonpositive_spectral_radius(self) -> None:
        with pytest.raises(DomainError, match="positive"):
            LayerRadii.uniform(1, spectral=0.0)

    def test_index_out_of_range(self) -> None:
        with pytest.raises(DomainError, match=r"\[0, 2\]"):
            LayerRadii.uniform(1, p=2.5)


class TestLayerFactors:
    """Tests for propagation_alpha, gamma_factor and beta_factor."""

    def test_alpha_uniform_radii(self) -> None:
        """Uniform unit radii with L_phi = 1 give alpha = 5^(L - l)."""
        radii = LayerRadii.uniform(3)
        assert [propagation_alpha(ell, radii, 1.0) for ell in (1, 2, 3)] == [
            25.0,
            5.0,
            1.0,
        ]

    def test_alpha_layer_out_of_range(self) -> None:
        with pytest.raises(InputError, match="out of range"):
            propagation_alpha(4, LayerRadii.uniform(3), 1.0)

    def test_gamma_input_bound_only_at_first_layer(self) -> None:
        """With B = 2 the QK factor is 2 B^3 at layer 1 and 2 afterwards."""
        radii = LayerRadii.uniform(2)
        cfg = unit_config(L=2, input_row_bound=2.0)
        assert gamma_factor("QK", 1, radii, cfg) == 16.0
        assert gamma_factor("QK", 2, radii, cfg) == 2.0
        assert gamma_factor("V", 1, radii, cfg) == 2.0
        assert gamma_factor("V", 2, radii, cfg) == 1.0
        assert gamma_factor("M", 1, radii, cfg) == 1.0

    def test_unknown_kind(self) -> None:
        with pytest.raises(DomainError, match="Unknown matrix kind"):
            gamma_factor("K", 1, LayerRadii.uniform(1), unit_config())

    def test_beta_top_layer_feedforward(self) -> None:
        """beta for the last feedforward matrix is just the readout radius."""
        radii = LayerRadii.uniform(2, spectral=2.0)
        cfg = unit_config(L=2, readout_radius=3.0)
        assert beta_factor("M", 2, radii, cfg) == 3.0
        assert beta_factor("V", 2, radii, cfg) == pytest.approx(6.0)


class TestAllocateRadii:
    """Tests for the closed-form weighted power allocation."""

    def test_single_entry(self) -> None:
        result = allocate_radii([2.0], [3.0], 6.0, 1.0)
        np.testing.assert_allclose(result.z, [2.0])
        assert result.value == pytest.approx(1.0)

    def test_symmetric_split(self) -> None:
        result = allocate_radii([1.0, 1.0], [1.0, 1.0], 2.0, 1.0)
        np.testing.assert_allclose(result.z, [1.0, 1.0])
        assert result.value == pytest.approx(2.0)

    def test_constraint_met_and_minimal(self) -> None:
        """The minimizer meets the constraint and beats feasible perturbations."""
        a, b, c, nu = [1.0, 4.0, 0.5], [2.0, 1.0, 3.0], 5.0, 0.7
        result = allocate_radii(a, b, c, nu)
        assert float(np.dot(b, result.z)) == pytest.approx(c)

        def objective(z: np.ndarray) -> float:
            return float(np.sum(np.asarray(a) * z ** (-nu)))

        assert objective(result.z) == pytest.approx(result.value, rel=1e-10)
        gen = np.random.default_rng(0)
        for _ in range(50):
            z = gen.uniform(0.1, 1.0, size=3)
            z *= c / float(np.dot(b, z))
            assert objective(z) >= result.value * (1.0 - 1e-10)

    def test_nonpositive_inputs(self) -> None:
        with pytest.raises(DomainError):
            allocate_radii([1.0, 0.0], [1.0, 1.0], 1.0, 1.0)

    def test_length_mismatch(self) -> None:
        with pytest.raises(InputError):
            allocate_radii([1.0], [1.0, 1.0], 1.0, 1.0)


class TestDudley:
    """Tests for the closed-form and numeric Dudley complexities."""

    def test_readout_only(self) -> None:
        """No power-law terms and C_last = A^2 n give (1 + log 2) A."""
        a, n = 2.0, 100
        value = dudley_complexity([], a**2 * n, a, n)
        assert value == pytest.approx((1.0 + math.log(2.0)) * a)

    def test_closed_form_dominates_numeric(self) -> None:
        """The closed form upper-bounds the numeric infimum within a small factor."""
        closed = dudley_complexity([(1.0, 1.0)], 1.0, 1.0, 100)
        numeric = dudley_entropy_integral(
            lambda eps: eps ** (-1.0) + eps ** (-2.0), 1.0, 100
        )
        assert numeric <= closed * (1.0 + 1e-6)
        assert closed <= 3.0 * numeric

    @pytest.mark.parametrize("nu", [-0.1, 2.0])
    def test_exponent_out_of_range(self, nu: float) -> None:
        with pytest.raises(DomainError, match=r"\[0, 2\)"):
            dudley_complexity([(1.0, nu)], 1.0, 1.0, 10)

    def test_nonpositive_range(self) -> None:
        with pytest.raises(DomainError):
            dudley_complexity([], 1.0, 0.0, 10)


class TestGapBounds:
    """Tests for the fixed-index gap bounds."""

    def test_general_rank_regime_sum(self) -> None:
        """p = 0, C_s = 16, N = 64, L = 2: six terms of sqrt(16 * 64)."""
        radii = LayerRadii.uniform(2, schatten=16.0, p=0.0)
        bound = gap_bound_general_p(radii, unit_config(N=64, L=2))
        assert bound.details["complexity_sum"] == pytest.approx(192.0)
        assert len(bound.per_matrix) == 6
        assert bound.per_matrix[0]["psi"] == pytest.approx(4.0)

    def test_total_is_sum_of_components(self) -> None:
        radii = LayerRadii.uniform(2, spectral=1.5, schatten=3.0, p=1.0)
        bound = gap_bound_general_p(radii, unit_config(L=2, univ_const=2.0))
        assert bound.total == pytest.approx(
            bound.main_term + bound.readout_term + bound.confidence_term
        )
        assert bound.to_dict()["total"] == bound.total

    def test_common_matches_general_on_one_layer(self) -> None:
        radii = LayerRadii.uniform(1, spectral=1.2, schatten=5.0, p=2.0)
        cfg = unit_config()
        general = gap_bound_general_p(radii, cfg)
        common = gap_bound_common_p(radii, cfg)
        assert common.main_term == pytest.approx(general.main_term, rel=1e-10)

    def test_common_not_above_general(self) -> None:
        radii = LayerRadii.uniform(3, spectral=1.2, schatten=5.0, p=2.0)
        cfg = unit_config(L=3)
        assert gap_bound_common_p(radii, cfg).total <= gap_bound_general_p(
            radii, cfg
        ).total * (1.0 + 1e-12)

    def test_common_rank_regime_xi(self) -> None:
        """At p = 0 with C_s = N: Xi = sqrt(3 L N) sqrt(N)."""
        width, depth = 16, 2
        radii = LayerRadii.uniform(depth, schatten=float(width), p=0.0)
        bound = gap_bound_common_p(radii, unit_config(N=width, L=depth))
        assert bound.details["xi"] == pytest.approx(
            math.sqrt(3 * depth * width) * math.sqrt(width)
        )
        assert bound.details["gamma_per_layer"] == pytest.approx([3.0 * width] * depth)

    def test_common_rejects_mixed_indices(self) -> None:
        radii = LayerRadii.uniform(1, p=1.0)
        radii.index[0, 1] = 0.5
        with pytest.raises(DomainError, match="single Schatten index"):
            common_index(radii)

    def test_dudley_route(self) -> None:
        radii = LayerRadii.uniform(2, schatten=4.0, p=1.0)
        bound = gap_bound_dudley(radii, unit_config(L=2))
        assert len(bound.per_matrix) == 6
        assert all(row["nu"] == pytest.approx(2.0 / 3.0) for row in bound.per_matrix)
        assert bound.details["c_out"] == pytest.approx(math.log(1000))
        assert bound.total == pytest.approx(
            bound.main_term + bound.readout_term + bound.confidence_term
        )

    def test_bound_grows_with_schatten_radius(self) -> None:
        cfg = unit_config(L=2)
        small = gap_bound_general_p(LayerRadii.uniform(2, schatten=2.0, p=1.0), cfg)
        large = gap_bound_general_p(LayerRadii.uniform(2, schatten=8.0, p=1.0), cfg)
        assert small.total < large.total

    @pytest.mark.parametrize(
        "bound", [gap_bound_general_p, gap_bound_common_p, gap_bound_dudley]
    )
    def test_config_depth_must_match_radii(self, bound) -> None:
        """A config L that disagrees with the radii is rejected, not ignored."""
        radii = LayerRadii.uniform(2, schatten=4.0, p=1.0)
        with pytest.raises(InputError, match="does not match radii depth 2"):
            bound(radii, unit_config(L=3))
