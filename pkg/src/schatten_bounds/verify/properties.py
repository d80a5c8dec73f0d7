"""
Bookkeeping for property suites.

Every property is an inequality ``lhs <= rhs + tol`` checked over many
seeded trials. Results keep the count, the number of failures, the worst
slack ``rhs - lhs`` and the first failing instance. Trial ``t`` of a run
with seed ``s`` always draws from ``default_rng((s, t))``, so an instance
replays from those two integers alone.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..core.errors import PropertyViolation
from ..utils.constants import PACKAGE_LOGGER_NAME

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.verify.properties")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng((seed, trial))


@dataclass
class PropertyResult:
    """Tally of one property over all trials."""

    name: str
    checked: int = 0
    failures: int = 0
    worst_slack: float = math.inf
    max_ratio: float | None = None
    first_failure: dict[str, Any] | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def check(
        self,
        lhs: float,
        rhs: float,
        instance: dict[str, Any],
        tol: float = 0.0,
    ) -> bool:
        """Record one ``lhs <= rhs + tol`` check."""
        lhs, rhs = float(lhs), float(rhs)
        holds = lhs <= rhs + tol
        self.checked += 1
        self.worst_slack = min(self.worst_slack, rhs - lhs)
        if rhs > 0:
            ratio = lhs / rhs
            if self.max_ratio is None or ratio > self.max_ratio:
                self.max_ratio = ratio
        if not holds:
            self.failures += 1
            if self.first_failure is None:
                self.first_failure = {**instance, "lhs": lhs, "rhs": rhs, "tol": tol}
                logger.warning(f"Property {self.name} violated: {self.first_failure}")
        return holds

    def require(self, condition: bool, instance: dict[str, Any]) -> bool:
        """Record a boolean check (slack 0 when it holds, -1 otherwise)."""
        return self.check(0.0 if condition else 1.0, 0.0, instance)

    def to_dict(self) -> dict[str, Any]:
        return {
            "property": self.name,
            "checked": self.checked,
            "failures": self.failures,
            "worst_slack": None if math.isinf(self.worst_slack) else self.worst_slack,
            "max_ratio": self.max_ratio,
            "first_failure": self.first_failure,
        }


@dataclass
class SuiteResult:
    """All properties of one suite."""

    suite: str
    trials: int
    seed: int
    properties: dict[str, PropertyResult] = field(default_factory=dict)

    def prop(self, name: str) -> PropertyResult:
        if name not in self.properties:
            self.properties[name] = PropertyResult(name)
        return self.properties[name]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties.values())

    def violation(self) -> PropertyViolation | None:
        """The first failing property as an exception, or None."""
        for result in self.properties.values():
            if not result.passed:
                instance = {
                    "suite": self.suite,
                    "seed": self.seed,
                    **(result.first_failure or {}),
                }
                return PropertyViolation(
                    f"{self.suite}: property {result.name} failed "
                    f"{result.failures}/{result.checked} checks",
                    property_name=result.name,
                    instance=instance,
                )
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "properties": [p.to_dict() for p in self.properties.values()],
        }
