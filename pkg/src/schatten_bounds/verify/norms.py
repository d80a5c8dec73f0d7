"""
Norm engine properties: Schatten powers, singular values, norm chains.
"""

import numpy as np

from ..analysis.baselines import conversion_bounds
from ..analysis.spectral import (
    numerical_rank,
    schatten_power,
    schatten_ratio,
    singular_values,
)
from .properties import SuiteResult, trial_rng

MAX_ROWS = 64
MAX_COLS = 96


def _gram_eigenvalues(w: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of the smaller Gram matrix (squared singular values)."""
    gram = w.T @ w if w.shape[1] <= w.shape[0] else w @ w.T
    return np.clip(np.sort(np.linalg.eigvalsh(gram))[::-1], 0.0, None)


def run_norms_suite(trials: int, seed: int) -> SuiteResult:
    result = SuiteResult("norms", trials, seed)
    for t in range(trials):
        rng = trial_rng(seed, t)
        rows = int(rng.integers(1, MAX_ROWS + 1))
        cols = int(rng.integers(1, MAX_COLS + 1))
        w = rng.standard_normal((rows, cols)) * float(rng.uniform(0.1, 10.0))
        instance = {"trial": t, "rows": rows, "cols": cols}
        spectrum = singular_values(w)
        sigma1 = spectrum.sigma_max

        squares = _gram_eigenvalues(w)
        result.prop("singular_values_vs_gram").check(
            float(np.max(np.abs(spectrum.values**2 - squares))),
            0.0,
            instance,
            tol=1e-10 * sigma1**2,
        )

        transposed = singular_values(w.T)
        result.prop("transpose_invariance").check(
            float(np.max(np.abs(spectrum.values - transposed.values))),
            0.0,
            instance,
            tol=1e-10 * sigma1,
        )

        p = float(rng.uniform(0.0, 2.0))
        oracle = float(np.sum(squares ** (p / 2.0)))
        result.prop("schatten_power_vs_direct_sum").check(
            abs(schatten_power(spectrum, p) - oracle),
            0.0,
            {**instance, "p": p},
            tol=1e-9 * oracle,
        )

        p, q = sorted(float(x) for x in rng.uniform(0.0, 2.0, size=2))
        rho_p, rho_q = schatten_ratio(spectrum, p), schatten_ratio(spectrum, q)
        sandwich = result.prop("schatten_sandwich")
        pair = {**instance, "p": p, "q": q}
        sandwich.check(1.0, rho_q, pair, tol=1e-9)
        sandwich.check(rho_q, rho_p, pair, tol=1e-9 * rho_p)
        sandwich.check(rho_p, min(rows, cols), pair, tol=1e-9 * rho_p)

        r = int(rng.integers(0, min(rows, cols) + 1))
        u, _ = np.linalg.qr(rng.standard_normal((rows, min(rows, cols))))
        v, _ = np.linalg.qr(rng.standard_normal((cols, min(rows, cols))))
        low_rank = (u[:, :r] * rng.uniform(0.5, 2.0, size=r)) @ v[:, :r].T
        measured = numerical_rank(singular_values(low_rank))
        result.prop("exact_rank_recovered").require(measured == r, {**instance, "r": r})

        n = int(rng.integers(1, MAX_ROWS + 1))
        chains = conversion_bounds(rng.standard_normal((n, n)))
        chain = result.prop("norm_conversion_chains")
        square = {"trial": t, "n": n}
        for lhs, rhs in (
            ("mixed21", "sqrtN_frob"),
            ("sqrtN_frob", "sqrtNrank_spec"),
            ("mixed11", "N_frob"),
            ("N_frob", "Nsqrtrank_spec"),
        ):
            chain.check(chains[lhs], chains[rhs], square, tol=1e-9 * chains[rhs])
    return result
