"""
Post hoc selection properties: separability against a joint grid search,
grid refinement, rounding, penalty bookkeeping and term scaling.
"""

import itertools
import math

import numpy as np

from ..analysis.bounds import BoundConfig
from ..analysis.model import random_matrix_with_norm, random_theory_weights
from ..analysis.posthoc import (
    SHELL_NORMALIZER,
    IndexGrid,
    MatrixSpec,
    ShellIndex,
    chi,
    complexity_from_specs,
    matrix_term,
    penalty_omega,
    select_from_specs,
    shell_weight,
    theory_matrix_specs,
)
from ..analysis.spectral import singular_values
from .properties import SuiteResult, trial_rng

MAX_WIDTH = 12
MAX_DEPTH = 3
# largest |j| summed in the shell weight check
SHELL_SPAN = 10_000


def _random_specs(
    rng: np.random.Generator, depth: int, width: int
) -> list[MatrixSpec]:
    weights = random_theory_weights(rng, width, depth, float(rng.uniform(0.3, 3.0)))
    cfg = BoundConfig(
        n=int(rng.integers(100, 10_000)),
        T=int(rng.integers(1, 256)),
        N=width,
        L=depth,
        input_row_bound=float(rng.uniform(0.5, 2.0)),
    )
    return theory_matrix_specs(weights, weights.layer_radii(0.0), cfg)


def _joint_grid_minimum(specs: list[MatrixSpec], grid: IndexGrid, width: int) -> float:
    return min(
        complexity_from_specs(specs, combo, width).total
        for combo in itertools.product(grid.values, repeat=len(specs))
    )


def _check_shell_weights(result: SuiteResult) -> None:
    prop = result.prop("shell_weights_sum_to_one")
    partial = shell_weight(ShellIndex(None)) + math.fsum(
        shell_weight(ShellIndex(j)) for j in range(-SHELL_SPAN, SHELL_SPAN + 1)
    )
    # two tails of sum_{j > J} 1/(1+j)^2 <= 1/(J+1)
    tail = 2.0 / (SHELL_NORMALIZER * (SHELL_SPAN + 1))
    instance = {"span": SHELL_SPAN}
    prop.check(partial, 1.0, instance, tol=1e-12)
    prop.check(1.0 - tail, partial, instance, tol=1e-12)


def run_posthoc_suite(trials: int, seed: int) -> SuiteResult:
    result = SuiteResult("posthoc", trials, seed)
    _check_shell_weights(result)
    for t in range(trials):
        rng = trial_rng(seed, t)
        width = int(rng.integers(2, MAX_WIDTH + 1))
        instance = {"trial": t, "N": width}

        small_m = int(rng.integers(1, 3))
        specs = _random_specs(rng, 1, width)
        small_grid = IndexGrid(small_m)
        selected = select_from_specs(specs, small_grid, width).total
        joint = _joint_grid_minimum(specs, small_grid, width)
        separable = result.prop("selection_matches_joint_grid")
        separable_instance = {**instance, "L": 1, "m": small_m}
        separable.check(selected, joint, separable_instance, tol=1e-11 * joint)
        separable.check(joint, selected, separable_instance, tol=1e-12 * selected)

        depth = int(rng.integers(1, MAX_DEPTH + 1))
        m = int(rng.integers(1, 6))
        specs = _random_specs(rng, depth, width)
        deep = {**instance, "L": depth, "m": m}
        coarse = select_from_specs(specs, IndexGrid(m), width)
        fine = select_from_specs(specs, IndexGrid(2 * m), width)
        result.prop("finer_grid_not_worse").check(
            fine.total, coarse.total, deep, tol=1e-12 * coarse.total
        )

        grid = IndexGrid(m)
        p_vec = rng.uniform(0.0, 2.0, size=len(specs))
        projected = [grid.project(float(p)) for p in p_vec]
        at_p = complexity_from_specs(specs, p_vec, width)
        at_grid = complexity_from_specs(specs, projected, width)
        factor = (
            math.exp(chi(specs) / (2.0 * m))
            * depth ** (1.0 / (2.0 * m))
            * width ** (1.0 / (4.0 * m))
        )
        result.prop("grid_rounding").check(
            at_grid.total, factor * at_p.total, deep, tol=1e-9 * at_grid.total
        )

        powers = [r["schatten_power"] for r in at_grid.records]
        omega = penalty_omega(powers, m)
        shuffled = penalty_omega(list(rng.permutation(powers)), m)
        result.prop("omega_permutation_invariant").check(
            abs(omega - shuffled), 0.0, deep, tol=1e-12 * omega
        )

        w = random_matrix_with_norm(rng, width, float(rng.uniform(0.5, 2.0)))
        c = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.01, 100.0))
        base = MatrixSpec("w", "M", 1, singular_values(w), 1.0, depth)
        scaled = MatrixSpec("cw", "M", 1, singular_values(c * w), 1.0, depth)
        scale_instance = {**instance, "c": c}
        _, term0 = matrix_term(base, 0.0, width)
        _, term0_scaled = matrix_term(scaled, 0.0, width)
        result.prop("rank_term_scale_invariant").check(
            abs(term0_scaled - term0), 0.0, scale_instance, tol=1e-12 * term0
        )
        _, term2 = matrix_term(base, 2.0, width)
        _, term2_scaled = matrix_term(scaled, 2.0, width)
        expected = math.sqrt(abs(c)) * term2
        result.prop("frobenius_term_sqrt_scaling").check(
            abs(term2_scaled - expected), 0.0, scale_instance, tol=1e-9 * expected
        )
    return result
