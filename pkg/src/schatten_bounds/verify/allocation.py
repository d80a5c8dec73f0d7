"""
Allocation properties: the closed-form power allocation against a
zooming grid search, and optimal against balanced covering scales.
"""

import itertools
import math

import numpy as np

from ..analysis.bounds import BoundConfig, LayerRadii, allocate_radii
from ..analysis.entropy import (
    balanced_epsilon_allocation,
    optimal_epsilon_allocation,
    scalar_entropy_objective,
)
from .properties import SuiteResult, trial_rng

MAX_TERMS = 4
GRID_POINTS = 10**6
ZOOM_ROUNDS = 4
# grid steps kept on each side of the best point when zooming
ZOOM_WINDOW = 3


def grid_search_allocation(
    a: np.ndarray, b: np.ndarray, c: float, nu: float, points: int = GRID_POINTS
) -> float:
    """Minimum of sum a_i z_i^{-nu} over sum b_i z_i = c by zooming grid search.

    Feasible points are parametrized by shares u on the simplex with
    z_i = c u_i / b_i; each round evaluates a regular grid in the first
    ``len(a) - 1`` shares and shrinks the window around the best point.
    """
    k = len(a)
    if k == 1:
        return float(a[0] * (c / b[0]) ** (-nu))
    free = k - 1
    per_dim = max(3, int((points / ZOOM_ROUNDS) ** (1.0 / free)))
    lo = np.zeros(free)
    hi = np.ones(free)
    best_value = math.inf
    best_u = np.full(free, 1.0 / k)
    for _ in range(ZOOM_ROUNDS):
        axes = [np.linspace(lo[i], hi[i], per_dim) for i in range(free)]
        grid = np.array(list(itertools.product(*axes)))
        shares = np.column_stack([grid, 1.0 - grid.sum(axis=1)])
        feasible = np.all(shares > 0.0, axis=1)
        if np.any(feasible):
            z = c * shares[feasible] / b
            values = np.sum(a * z ** (-nu), axis=1)
            i = int(np.argmin(values))
            if values[i] < best_value:
                best_value = float(values[i])
                best_u = grid[feasible][i]
        step = (hi - lo) / (per_dim - 1)
        lo = np.clip(best_u - ZOOM_WINDOW * step, 0.0, 1.0)
        hi = np.clip(best_u + ZOOM_WINDOW * step, 0.0, 1.0)
    return best_value


def run_allocation_suite(trials: int, seed: int) -> SuiteResult:
    result = SuiteResult("allocation", trials, seed)
    for t in range(trials):
        rng = trial_rng(seed, t)
        k = int(rng.integers(1, MAX_TERMS + 1))
        a = rng.uniform(0.1, 10.0, size=k)
        b = rng.uniform(0.1, 10.0, size=k)
        c = float(rng.uniform(0.1, 10.0))
        nu = float(rng.uniform(0.1, 2.0))
        instance = {"trial": t, "a": a.tolist(), "b": b.tolist(), "c": c, "nu": nu}
        allocation = allocate_radii(a, b, c, nu)

        result.prop("allocation_feasible").check(
            abs(float(np.dot(b, allocation.z)) - c), 0.0, instance, tol=1e-12 * c
        )
        direct = float(np.sum(a * allocation.z ** (-nu)))
        result.prop("allocation_value").check(
            abs(direct - allocation.value), 0.0, instance, tol=1e-12 * direct
        )
        oracle = grid_search_allocation(a, b, c, nu)
        optimality = result.prop("allocation_vs_grid_oracle")
        optimality.check(allocation.value, oracle, instance, tol=1e-12 * oracle)
        optimality.check(
            oracle, allocation.value, instance, tol=1e-4 * allocation.value
        )

        depth = int(rng.integers(1, 4))
        p = float(rng.uniform(0.1, 2.0))
        shape = (depth, 3)
        radii = LayerRadii(
            spectral=rng.uniform(0.5, 2.0, size=shape),
            schatten=rng.uniform(0.5, 20.0, size=shape),
            index=np.full(shape, p),
        )
        cfg = BoundConfig(
            n=int(rng.integers(100, 10_000)),
            T=int(rng.integers(1, 512)),
            N=int(rng.integers(2, 128)),
            L=depth,
            input_row_bound=float(rng.uniform(0.5, 2.0)),
        )
        eps = float(rng.uniform(0.01, 1.0))
        scales, eps_out = balanced_epsilon_allocation(radii, cfg, eps)
        balanced = scalar_entropy_objective(radii, cfg, scales, eps_out)
        scales, eps_out = optimal_epsilon_allocation(radii, cfg, eps)
        optimal = scalar_entropy_objective(radii, cfg, scales, eps_out)
        result.prop("optimal_beats_balanced").check(
            optimal,
            balanced,
            {"trial": t, "L": depth, "p": p, "eps": eps},
            tol=1e-12 * balanced,
        )
    return result
