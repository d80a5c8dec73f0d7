"""
Property suites for the numerical engine.

Suites:
- norms: singular values, Schatten powers, norm conversion chains
- lipschitz: softmax, projection, head and block perturbation bounds
- allocation: closed-form radius allocation and covering scales
- posthoc: grid selection, rounding and penalty bookkeeping
- parser: tensor file round trips and mutation fuzzing
"""

import logging
from collections.abc import Callable, Sequence

from ..utils.constants import PACKAGE_LOGGER_NAME
from .allocation import run_allocation_suite
from .lipschitz import run_lipschitz_suite
from .norms import run_norms_suite
from .parser import run_parser_suite
from .posthoc import run_posthoc_suite
from .properties import PropertyResult, SuiteResult, trial_rng

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.verify")

SuiteRunner = Callable[[int, int], SuiteResult]

SUITES: dict[str, SuiteRunner] = {
    "norms": run_norms_suite,
    "lipschitz": run_lipschitz_suite,
    "allocation": run_allocation_suite,
    "posthoc": run_posthoc_suite,
    "parser": run_parser_suite,
}


def get_suites(names: Sequence[str] | None = None) -> list[tuple[str, SuiteRunner]]:
    """Suites to run, in registry order; ``None`` selects all of them."""
    if names is None:
        return list(SUITES.items())
    unknown = set(names) - set(SUITES)
    if unknown:
        raise KeyError(f"Unknown suite(s): {sorted(unknown)}")
    return [(name, runner) for name, runner in SUITES.items() if name in names]


def run_suites(
    names: Sequence[str] | None, trials: int, seed: int
) -> list[SuiteResult]:
    results = []
    for name, runner in get_suites(names):
        logger.info(f"Running suite {name} with {trials} trials (seed {seed})")
        result = runner(trials, seed)
        status = "passed" if result.passed else "FAILED"
        logger.info(f"Suite {name} {status}: {len(result.properties)} properties")
        results.append(result)
    return results


__all__ = [
    # Registry
    "SUITES",
    "SuiteRunner",
    "get_suites",
    "run_suites",
    # Bookkeeping
    "PropertyResult",
    "SuiteResult",
    "trial_rng",
    # Suites
    "run_allocation_suite",
    "run_lipschitz_suite",
    "run_norms_suite",
    "run_parser_suite",
    "run_posthoc_suite",
]
