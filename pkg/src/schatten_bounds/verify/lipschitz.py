"""
Forward-pass properties: softmax, row projection, head and block
perturbation inequalities, readout bound.
"""

import numpy as np

from ..analysis.model import (
    ACTIVATIONS,
    block_forward,
    block_lipschitz_constant,
    head_forward,
    head_perturbation_bound,
    project_rows,
    random_matrix_with_norm,
    random_rows,
    random_theory_weights,
    scalar_output,
    softmax_rows,
)
from ..analysis.spectral import two_to_inf_norm
from .properties import SuiteResult, trial_rng

MAX_TOKENS = 16
MAX_WIDTH = 32
# absolute slack for the perturbation inequalities
SLACK = 1e-9


def _nearby_rows(
    rng: np.random.Generator, x: np.ndarray, scale: float, row_bound: float
) -> np.ndarray:
    """Perturb ``x`` and pull every row back inside the ``row_bound`` ball."""
    y = x + scale * rng.standard_normal(x.shape)
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    return y / np.maximum(1.0, norms / row_bound)


def run_lipschitz_suite(trials: int, seed: int) -> SuiteResult:
    result = SuiteResult("lipschitz", trials, seed)
    kinds = sorted(ACTIVATIONS)
    for t in range(trials):
        rng = trial_rng(seed, t)
        tokens = int(rng.integers(1, MAX_TOKENS + 1))
        width = int(rng.integers(2, MAX_WIDTH + 1))
        act = ACTIVATIONS[kinds[t % len(kinds)]]
        instance = {"trial": t, "T": tokens, "N": width, "activation": act.kind}

        z = rng.standard_normal((tokens, tokens)) * float(rng.uniform(0.1, 100.0))
        probs = softmax_rows(z)
        result.prop("softmax_row_sums").check(
            float(np.max(np.abs(probs.sum(axis=1) - 1.0))), 0.0, instance, tol=1e-12
        )
        result.prop("softmax_nonnegative").require(bool(np.all(probs >= 0.0)), instance)

        u = rng.standard_normal(tokens) * 3.0
        v = u + rng.standard_normal(tokens) * float(rng.uniform(1e-3, 1.0))
        diff1 = float(np.abs(softmax_rows(u[None, :]) - softmax_rows(v[None, :])).sum())
        result.prop("softmax_l1_linf").check(
            diff1, 2.0 * float(np.max(np.abs(u - v))), instance, tol=1e-12
        )

        a = rng.standard_normal((tokens, width)) * 2.0
        b = rng.standard_normal((tokens, width)) * 2.0
        result.prop("projection_nonexpansive").check(
            two_to_inf_norm(project_rows(a) - project_rows(b)),
            two_to_inf_norm(a - b),
            instance,
            tol=1e-12,
        )

        row_bound = float(rng.uniform(0.2, 1.5))
        c2 = rng.uniform(0.1, 2.0, size=3)
        w_qk, w_v, w_m = (random_matrix_with_norm(rng, width, float(c)) for c in c2)
        x = random_rows(rng, tokens, width, row_bound)
        w_qk_alt = w_qk + 0.05 * rng.standard_normal((width, width))
        w_v_alt = w_v + 0.05 * rng.standard_normal((width, width))
        lhs = two_to_inf_norm(
            head_forward(x, w_qk, w_v) - head_forward(x, w_qk_alt, w_v_alt)
        )
        result.prop("head_perturbation").check(
            lhs,
            head_perturbation_bound(x, w_qk, w_qk_alt, w_v, w_v_alt),
            {**instance, "B": row_bound},
            tol=SLACK,
        )

        x_alt = _nearby_rows(rng, x, float(rng.uniform(1e-3, 0.5)), row_bound)
        out = block_forward(x, w_qk, w_v, w_m, act)
        out_alt = block_forward(x_alt, w_qk, w_v, w_m, act)
        constant = block_lipschitz_constant(*c2, act.lipschitz, row_bound)
        result.prop("block_lipschitz").check(
            two_to_inf_norm(out - out_alt),
            constant * two_to_inf_norm(x - x_alt),
            {**instance, "B": row_bound, "C2": c2.tolist()},
            tol=SLACK,
        )
        result.prop("block_output_rows").check(
            two_to_inf_norm(out), 1.0, instance, tol=1e-12
        )

        depth = int(rng.integers(1, 4))
        weights = random_theory_weights(rng, width, depth, float(rng.uniform(0.5, 2.0)))
        readout_norm = float(np.linalg.norm(weights.readout))
        result.prop("readout_bound").check(
            abs(scalar_output(random_rows(rng, tokens, width), weights, act)),
            readout_norm,
            {**instance, "L": depth},
            tol=1e-12,
        )
    return result
