"""
Norm-based baseline proxies and the regime comparison table.

Edelman-type and Trauger-type leading factors are evaluated from mixed-norm
radii in their published closed forms. The regime table
compares the leading complexity factor of the three bounds under Frobenius,
rank and spectral-only constraints.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from ..core.errors import DomainError, InputError
from ..utils.constants import PACKAGE_LOGGER_NAME
from .bounds import KINDS, BoundConfig, LayerRadii, propagation_alpha
from .model import TheoryWeights
from .spectral import (
    as_matrix,
    frobenius_norm,
    mixed_norm,
    numerical_rank,
    singular_values,
)

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.analysis.baselines")

REGIMES = ("frobenius", "rank", "spectral_only")
METHODS = ("ours", "edelman", "trauger")


@dataclass
class MixedRadii:
    """Per-layer (2,1) and (1,1) mixed-norm radii, columns in QK, V, M order."""

    mixed21: np.ndarray
    mixed11: np.ndarray

    def __post_init__(self) -> None:
        self.mixed21 = np.asarray(self.mixed21, dtype=np.float64)
        self.mixed11 = np.asarray(self.mixed11, dtype=np.float64)
        shape = self.mixed21.shape
        if len(shape) != 2 or shape[1] != 3 or self.mixed11.shape != shape:
            raise InputError(f"Mixed radii must have shape (L, 3), got {shape}")
        if np.any(self.mixed21 < 0) or np.any(self.mixed11 < 0):
            raise DomainError("Mixed-norm radii must be nonnegative")

    @property
    def depth(self) -> int:
        return self.mixed21.shape[0]

    def c21(self, kind: str, ell: int) -> float:
        return float(self.mixed21[ell - 1, KINDS.index(kind)])

    def c11(self, kind: str, ell: int) -> float:
        return float(self.mixed11[ell - 1, KINDS.index(kind)])


def mixed_radii_from_weights(weights: TheoryWeights) -> MixedRadii:
    """Observed mixed norms; the QK entry measures the transpose."""
    rows21, rows11 = [], []
    for layer in weights.layers:
        rows21.append(
            [
                mixed_norm(layer.qk.T, 2, 1),
                mixed_norm(layer.v, 2, 1),
                mixed_norm(layer.m, 2, 1),
            ]
        )
        rows11.append([mixed_norm(mat, 1, 1) for mat in (layer.qk, layer.v, layer.m)])
    return MixedRadii(np.array(rows21), np.array(rows11))


def _check_depths(mixed: MixedRadii, radii: LayerRadii) -> None:
    if mixed.depth != radii.depth:
        raise InputError(
            f"Mixed radii cover {mixed.depth} layers but radii cover {radii.depth}"
        )


def edelman_xi(ell: int, mixed: MixedRadii, radii: LayerRadii, lphi: float) -> float:
    c2_m, c2_v = radii.c2("M", ell), radii.c2("V", ell)
    return (
        mixed.c21("M", ell) ** (2.0 / 3.0)
        + (2.0 * lphi * c2_m * c2_v * mixed.c21("QK", ell)) ** (2.0 / 3.0)
        + (lphi * c2_m * mixed.c21("V", ell)) ** (2.0 / 3.0)
    )


def edelman_factor(
    mixed: MixedRadii, radii: LayerRadii, cfg: BoundConfig
) -> tuple[float, float]:
    """Return ``(leading_factor, full_proxy)`` of the Edelman-type bound.

    xi carries no input-bound factor at layer 1.
    """
    _check_depths(mixed, radii)
    inner = sum(
        propagation_alpha(ell, radii, cfg.act_lipschitz) ** (2.0 / 3.0)
        * edelman_xi(ell, mixed, radii, cfg.act_lipschitz)
        for ell in range(1, radii.depth + 1)
    )
    leading = (1.0 + inner) ** 1.5
    n = cfg.n
    full = cfg.univ_const * (
        cfg.loss_lipschitz
        * cfg.readout_radius
        * math.sqrt(math.log(cfg.N * n * cfg.T) / n)
        * leading
        + cfg.loss_bound * math.sqrt(math.log(1.0 / cfg.delta) / n)
    )
    return leading, full


def _uniform_column(radii: LayerRadii, kind: str) -> float:
    column = radii.spectral[:, KINDS.index(kind)]
    if not np.allclose(column, column[0], rtol=1e-12, atol=0.0):
        raise DomainError(f"Trauger factor needs a uniform {kind} spectral radius")
    return float(column[0])


def trauger_factor(
    c11: float, radii: LayerRadii, cfg: BoundConfig
) -> tuple[float, float]:
    """Return ``(leading_factor, full_proxy)`` of the Trauger-type bound."""
    if c11 < 0:
        raise DomainError(f"C_{{1,1}} must be nonnegative, got {c11}")
    lphi = cfg.act_lipschitz
    c2_m = _uniform_column(radii, "M")
    c2_v = _uniform_column(radii, "V")
    _uniform_column(radii, "QK")
    upsilon_first = (2.0 * lphi * c2_m * c2_v * cfg.input_row_bound) ** (2.0 / 3.0)
    upsilon_rest = (
        1.0 + (2.0 * lphi * c2_m * c2_v) ** (2.0 / 3.0) + (lphi * c2_v) ** (2.0 / 3.0)
    )
    inner = sum(
        propagation_alpha(ell, radii, lphi) ** (2.0 / 3.0)
        * (upsilon_first if ell == 1 else upsilon_rest)
        for ell in range(1, radii.depth + 1)
    )
    leading = c11 * (1.0 + (lphi * c2_v) ** (2.0 / 3.0) + inner) ** 1.5
    n = cfg.n
    full = cfg.univ_const * (
        cfg.loss_lipschitz
        * cfg.readout_radius
        * math.sqrt(math.log(2.0 * cfg.N**2 + 1.0) / n)
        * leading
        + cfg.loss_bound * math.sqrt(math.log(1.0 / cfg.delta) / n)
    )
    return leading, full


def conversion_bounds(m: ArrayLike) -> dict[str, float]:
    """Both norm-conversion chains for a square matrix.

    ||W||_{2,1} <= sqrt(N) ||W||_F <= sqrt(N rank) ||W||_2 and
    ||W||_{1,1} <= N ||W||_F <= N sqrt(rank) ||W||_2.
    """
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise InputError(f"conversion_bounds needs a square matrix, got {arr.shape}")
    width = arr.shape[0]
    spectrum = singular_values(arr)
    rank = numerical_rank(spectrum)
    frob = frobenius_norm(arr)
    return {
        "mixed21": mixed_norm(arr, 2, 1),
        "sqrtN_frob": math.sqrt(width) * frob,
        "sqrtNrank_spec": math.sqrt(width * rank) * spectrum.sigma_max,
        "mixed11": mixed_norm(arr, 1, 1),
        "N_frob": width * frob,
        "Nsqrtrank_spec": width * math.sqrt(rank) * spectrum.sigma_max,
    }


@dataclass(frozen=True)
class Monomial:
    """Product of powers; ``per_layer`` exponents are multiplied by L."""

    factors: tuple[tuple[str, Fraction, bool], ...]

    def render(self) -> str:
        """Text form; adjacent square roots merge, e.g. sqrt(r*L*N)."""
        parts: list[str] = []
        roots: list[str] = []
        for base, exponent, per_layer in self.factors:
            if exponent == Fraction(1, 2) and not per_layer:
                roots.append(base)
                continue
            if roots:
                parts.append(f"sqrt({'*'.join(roots)})")
                roots = []
            parts.append(_render_power(base, exponent, per_layer))
        if roots:
            parts.append(f"sqrt({'*'.join(roots)})")
        return "*".join(parts)

    def evaluate(self, values: dict[str, float]) -> float:
        depth = values["L"]
        result = 1.0
        for base, exponent, per_layer in self.factors:
            power = float(exponent) * (depth if per_layer else 1.0)
            result *= values[base] ** power
        return result


def _render_power(base: str, exponent: Fraction, per_layer: bool) -> str:
    if per_layer:
        if exponent == 1:
            return f"{base}^L"
        if exponent.numerator == 1:
            return f"{base}^(L/{exponent.denominator})"
        return f"{base}^({exponent.numerator}L/{exponent.denominator})"
    if exponent == 1:
        return base
    return f"{base}^({exponent})"


def _mono(*factors: tuple[str, str, bool]) -> Monomial:
    return Monomial(tuple((b, Fraction(e), per) for b, e, per in factors))


# Leading complexity factors per constraint regime.
REGIME_FORMULAS: dict[str, dict[str, Monomial]] = {
    "frobenius": {
        "ours": _mono(("C_F", "1/2", False), ("C", "1/2", True), ("L", "1", False), ("N", "3/4", False)),
        "edelman": _mono(("C_F", "1", False), ("C", "1", True), ("L", "3/2", False), ("N", "1/2", False)),
        "trauger": _mono(("C_F", "1", False), ("C", "1", True), ("L", "3/2", False), ("N", "1", False)),
    },
    "rank": {
        "ours": _mono(("r", "1/2", False), ("L", "1/2", False), ("N", "1/2", False)),
        "edelman": _mono(("C", "1", True), ("L", "3/2", False), ("r", "1/2", False), ("N", "1/2", False)),
        "trauger": _mono(("C", "1", True), ("L", "3/2", False), ("r", "1/2", False), ("N", "1", False)),
    },
    "spectral_only": {
        "ours": _mono(("L", "1/2", False), ("N", "1", False)),
        "edelman": _mono(("C", "1", True), ("L", "3/2", False), ("N", "1", False)),
        "trauger": _mono(("C", "1", True), ("L", "3/2", False), ("N", "3/2", False)),
    },
}  # fmt: skip


def regime_table(
    regime: str,
    width: float,
    depth: float,
    c: float,
    r: float | None = None,
    c_f: float | None = None,
) -> dict[str, Any]:
    """Leading factors of the three bounds in one constraint regime.

    Returns the numeric values and their symbolic formulas per method.
    """
    if regime not in REGIME_FORMULAS:
        raise DomainError(f"Unknown regime '{regime}'. Expected one of {REGIMES}")
    values = {"N": float(width), "L": float(depth), "C": float(c)}
    if regime == "rank":
        if r is None:
            raise InputError("The rank regime needs r")
        values["r"] = float(r)
    if regime == "frobenius":
        if c_f is None:
            raise InputError("The Frobenius regime needs C_F")
        values["C_F"] = float(c_f)
    if any(v <= 0 for v in values.values()):
        raise DomainError(f"Regime parameters must be positive, got {values}")
    formulas = REGIME_FORMULAS[regime]
    return {
        "regime": regime,
        "parameters": values,
        "values": {method: formulas[method].evaluate(values) for method in METHODS},
        "symbols": {method: formulas[method].render() for method in METHODS},
    }
