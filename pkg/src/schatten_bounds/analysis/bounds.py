"""
Fixed-index bound formulas.

This module contains:
- BoundConfig: Validated scalars every bound depends on
- LayerRadii: Per-layer spectral radii, Schatten radii and Schatten indices
- propagation_alpha, gamma_factor, beta_factor: Layerwise factors
- allocate_radii: Closed-form weighted power allocation
- dudley_complexity, dudley_entropy_integral: Rademacher complexity from
  power-law entropy (closed form and numeric oracle)
- gap_bound_general_p, gap_bound_common_p, gap_bound_dudley: Fixed-index
  generalization-gap proxies

Every suppressed universal constant is replaced by ``univ_const`` (1 by
default), so all values are proxies rather than certified bounds.
Logarithms are natural.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import cumulative_trapezoid

from ..core.errors import DomainError, InputError
from ..utils.constants import (
    DEFAULT_DELTA,
    DEFAULT_DEPTH,
    DEFAULT_HIDDEN_DIM,
    DEFAULT_INPUT_ROW_BOUND,
    DEFAULT_LOSS_BOUND,
    DEFAULT_LOSS_LIPSCHITZ,
    DEFAULT_READOUT_RADIUS,
    DEFAULT_SAMPLE_SIZE,
    DEFAULT_TOKEN_LENGTH,
    DEFAULT_UNIV_CONST,
    GELU_LIPSCHITZ,
    PACKAGE_LOGGER_NAME,
)

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.analysis.bounds")

KINDS = ("QK", "V", "M")
_KIND_INDEX = {kind: i for i, kind in enumerate(KINDS)}


class BoundConfig(BaseModel):
    """Scalars shared by every bound formula."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(
        default=DEFAULT_SAMPLE_SIZE,
        ge=3,
        title="Sample size",
        description="Number of training sequences n",
    )
    T: int = Field(
        default=DEFAULT_TOKEN_LENGTH,
        ge=1,
        title="Token length",
        description="Tokens per sequence T",
    )
    N: int = Field(
        default=DEFAULT_HIDDEN_DIM,
        ge=1,
        title="Hidden dimension",
        description="Model width N",
    )
    L: int = Field(
        default=DEFAULT_DEPTH, ge=1, title="Depth", description="Number of blocks L"
    )
    delta: float = Field(
        default=DEFAULT_DELTA,
        gt=0.0,
        lt=1.0,
        title="Confidence",
        description="Failure probability delta",
    )
    loss_lipschitz: float = Field(
        default=DEFAULT_LOSS_LIPSCHITZ,
        gt=0.0,
        title="Loss Lipschitz constant",
        description="Lipschitz constant of the loss in its first argument",
    )
    loss_bound: float = Field(
        default=DEFAULT_LOSS_BOUND,
        gt=0.0,
        title="Loss bound",
        description="Uniform bound on the loss",
    )
    readout_radius: float = Field(
        default=DEFAULT_READOUT_RADIUS,
        gt=0.0,
        title="Readout radius",
        description="Euclidean radius of the readout vector",
    )
    act_lipschitz: float = Field(
        default=GELU_LIPSCHITZ,
        gt=0.0,
        title="Activation Lipschitz constant",
        description="Lipschitz constant of the feedforward activation",
    )
    input_row_bound: float = Field(
        default=DEFAULT_INPUT_ROW_BOUND,
        gt=0.0,
        title="Input row bound",
        description="Bound on the 2->inf norm of every input sequence",
    )
    univ_const: float = Field(
        default=DEFAULT_UNIV_CONST,
        gt=0.0,
        title="Universal constant",
        description="Multiplier standing in for every suppressed constant",
    )


@dataclass
class LayerRadii:
    """Per-layer radii and indices for the QK, V and M matrices.

    Attributes:
        spectral: ``(L, 3)`` spectral radii C2, columns in QK, V, M order.
        schatten: ``(L, 3)`` Schatten radii C_s (``rank`` bounds at p = 0).
        index: ``(L, 3)`` Schatten indices p in [0, 2].
    """

    spectral: np.ndarray
    schatten: np.ndarray
    index: np.ndarray

    def __post_init__(self) -> None:
        self.spectral = np.asarray(self.spectral, dtype=np.float64)
        self.schatten = np.asarray(self.schatten, dtype=np.float64)
        self.index = np.asarray(self.index, dtype=np.float64)
        shape = self.spectral.shape
        if len(shape) != 2 or shape[1] != 3 or shape[0] < 1:
            raise InputError(f"Radii must have shape (L, 3), got {shape}")
        if self.schatten.shape != shape or self.index.shape != shape:
            raise InputError("Spectral, Schatten and index arrays must share a shape")
        if np.any(self.spectral <= 0):
            raise DomainError("Spectral radii must be positive")
        if np.any(self.schatten < 0):
            raise DomainError("Schatten radii must be nonnegative")
        if np.any((self.index < 0) | (self.index > 2)):
            raise DomainError("Schatten indices must lie in [0, 2]")

    @property
    def depth(self) -> int:
        return self.spectral.shape[0]

    @classmethod
    def uniform(
        cls, depth: int, spectral: float = 1.0, schatten: float = 1.0, p: float = 0.0
    ) -> "LayerRadii":
        shape = (depth, 3)
        return cls(
            np.full(shape, spectral), np.full(shape, schatten), np.full(shape, p)
        )

    def c2(self, kind: str, ell: int) -> float:
        return float(self.spectral[ell - 1, kind_index(kind)])

    def cs(self, kind: str, ell: int) -> float:
        return float(self.schatten[ell - 1, kind_index(kind)])

    def p(self, kind: str, ell: int) -> float:
        return float(self.index[ell - 1, kind_index(kind)])

    def entries(self) -> list[tuple[int, str]]:
        """All ``(layer, kind)`` pairs in layer-major QK, V, M order."""
        return [(ell, kind) for ell in range(1, self.depth + 1) for kind in KINDS]


@dataclass
class BoundBreakdown:
    """A bound value split into its named components.

    Components already include ``univ_const``, so ``total`` is their sum.
    """

    total: float
    main_term: float
    readout_term: float
    confidence_term: float
    per_matrix: list[dict[str, Any]] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "main_term": self.main_term,
            "readout_term": self.readout_term,
            "confidence_term": self.confidence_term,
            "per_matrix": self.per_matrix,
            "details": self.details,
        }


@dataclass(frozen=True)
class AllocationResult:
    z: np.ndarray
    value: float


def kind_index(kind: str) -> int:
    try:
        return _KIND_INDEX[kind]
    except KeyError:
        raise DomainError(
            f"Unknown matrix kind '{kind}'. Expected one of {KINDS}"
        ) from None


def _check_layer(ell: int, depth: int) -> None:
    if not 1 <= ell <= depth:
        raise InputError(f"Layer index {ell} out of range [1, {depth}]")


def _check_sample_size(cfg: BoundConfig) -> None:
    if cfg.n < 3:
        raise DomainError(f"Bounds require n >= 3, got {cfg.n}")


def _check_depth(radii: LayerRadii, cfg: BoundConfig) -> None:
    if cfg.L != radii.depth:
        raise InputError(
            f"Config depth L = {cfg.L} does not match radii depth {radii.depth}"
        )


def propagation_alpha(ell: int, radii: LayerRadii, act_lipschitz: float) -> float:
    """Product over later layers of L_phi C2^M C2^V (1 + 4 C2^QK); 1 at the top."""
    _check_layer(ell, radii.depth)
    alpha = 1.0
    for k in range(ell + 1, radii.depth + 1):
        alpha *= (
            act_lipschitz
            * radii.c2("M", k)
            * radii.c2("V", k)
            * (1.0 + 4.0 * radii.c2("QK", k))
        )
    return alpha


def gamma_factor(kind: str, ell: int, radii: LayerRadii, cfg: BoundConfig) -> float:
    """Local factor of a matrix; the input bound enters only at layer 1."""
    _check_layer(ell, radii.depth)
    first = 1.0 if ell == 1 else 0.0
    b = cfg.input_row_bound
    if kind == "QK":
        return 2.0 * radii.c2("V", ell) * radii.c2("M", ell) * b ** (3.0 * first)
    if kind == "V":
        return radii.c2("M", ell) * b**first
    if kind == "M":
        return 1.0
    raise DomainError(f"Unknown matrix kind '{kind}'. Expected one of {KINDS}")


def beta_factor(kind: str, ell: int, radii: LayerRadii, cfg: BoundConfig) -> float:
    """Output-radius weight of a matrix's covering scale."""
    alpha = propagation_alpha(ell, radii, cfg.act_lipschitz)
    first = 1.0 if ell == 1 else 0.0
    base = cfg.readout_radius * alpha
    if kind == "QK":
        return (
            cfg.act_lipschitz
            * base
            * 2.0
            * radii.c2("V", ell)
            * radii.c2("M", ell)
            * cfg.input_row_bound ** (2.0 * first)
        )
    if kind == "V":
        return cfg.act_lipschitz * base * radii.c2("M", ell)
    if kind == "M":
        return base
    raise DomainError(f"Unknown matrix kind '{kind}'. Expected one of {KINDS}")


def allocate_radii(
    a: Sequence[float], b: Sequence[float], c: float, nu: float
) -> AllocationResult:
    """Minimize sum a_i z_i^{-nu} subject to sum b_i z_i = c, in closed form.

    Returns the unique minimizer and the minimum value
    c^{-nu} (sum a_i^{1/(nu+1)} b_i^{nu/(nu+1)})^{nu+1}.
    """
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    if a_arr.ndim != 1 or a_arr.shape != b_arr.shape or a_arr.size == 0:
        raise InputError("a and b must be nonempty vectors of equal length")
    if np.any(a_arr <= 0) or np.any(b_arr <= 0) or c <= 0 or nu <= 0:
        raise DomainError("allocate_radii requires a, b, c, nu > 0")
    weights = a_arr ** (1.0 / (nu + 1.0))
    denom = float(np.sum(weights * b_arr ** (nu / (nu + 1.0))))
    z = c * weights * b_arr ** (-1.0 / (nu + 1.0)) / denom
    value = c ** (-nu) * denom ** (nu + 1.0)
    return AllocationResult(z=z, value=value)


def _dudley_parts(
    terms: Sequence[tuple[float, float]], c_last: float, a: float, n: int
) -> tuple[float, float]:
    """Power-law and logarithmic parts of the Dudley sum, before 1/sqrt(n)."""
    if a <= 0:
        raise DomainError(f"Range bound A must be positive, got {a}")
    power = 0.0
    for c_i, nu_i in terms:
        if c_i < 0:
            raise DomainError(f"Entropy coefficients must be nonnegative, got {c_i}")
        if not 0.0 <= nu_i < 2.0:
            raise DomainError(f"Power-law exponents must lie in [0, 2), got {nu_i}")
        power += a ** (1.0 - nu_i / 2.0) / (1.0 - nu_i / 2.0) * math.sqrt(c_i)
    if c_last < 0:
        raise DomainError(f"Entropy coefficients must be nonnegative, got {c_last}")
    last = 0.0
    if c_last > 0:
        root = math.sqrt(c_last)
        last = (1.0 + math.log(1.0 + a * math.sqrt(n) / root)) * root
    return power, last


def dudley_complexity(
    terms: Sequence[tuple[float, float]],
    c_last: float,
    a: float,
    n: int,
    univ_const: float = DEFAULT_UNIV_CONST,
) -> float:
    """Rademacher complexity for entropy sum_i C_i eps^{-nu_i} + C_last eps^{-2}.

    Uses the cutoff alpha = min(A, sqrt(C_last / n)).
    """
    power, last = _dudley_parts(terms, c_last, a, n)
    return univ_const * (power + last) / math.sqrt(n)


def dudley_entropy_integral(
    entropy: Callable[[np.ndarray], np.ndarray],
    a: float,
    n: int,
    points: int = 10_000,
    floor: float = 1e-8,
) -> float:
    """Numeric inf over alpha of alpha + int_alpha^A sqrt(entropy(eps) / n) deps.

    The scale grid is geometric on [floor * A, A]; integration uses the
    trapezoid rule.
    """
    eps = np.geomspace(floor * a, a, points)
    integrand = np.sqrt(np.maximum(entropy(eps), 0.0) / n)
    # tail[i] = integral from eps[i] to A
    cumulative = cumulative_trapezoid(integrand, eps, initial=0.0)
    tail = cumulative[-1] - cumulative
    return float(np.min(eps + tail))


def _log_terms(cfg: BoundConfig) -> tuple[float, float, float]:
    """sqrt(log(nT)/n), readout term and confidence term, without univ_const."""
    n = cfg.n
    scale = math.sqrt(math.log(n * cfg.T) / n)
    readout = (
        cfg.loss_lipschitz * cfg.readout_radius * math.log(n) ** 1.5 / math.sqrt(n)
    )
    confidence = cfg.loss_bound * math.sqrt(math.log(1.0 / cfg.delta) / n)
    return scale, readout, confidence


def gap_bound_general_p(radii: LayerRadii, cfg: BoundConfig) -> BoundBreakdown:
    """Fixed-index bound with a separate Schatten index per matrix."""
    _check_sample_size(cfg)
    _check_depth(radii, cfg)
    depth, width = radii.depth, cfg.N
    scale, readout, confidence = _log_terms(cfg)
    per_matrix = []
    total_terms = 0.0
    for ell, kind in radii.entries():
        p = radii.p(kind, ell)
        cs = radii.cs(kind, ell)
        alpha = propagation_alpha(ell, radii, cfg.act_lipschitz)
        gamma = gamma_factor(kind, ell, radii, cfg)
        psi = cs ** (1.0 / (p + 2.0)) * (cfg.act_lipschitz * gamma * alpha) ** (
            p / (p + 2.0)
        )
        term = psi * depth ** (p / (p + 2.0)) * width ** ((p + 1.0) / (p + 2.0))
        total_terms += term
        per_matrix.append(
            {"layer": ell, "kind": kind, "p": p, "C_s": cs, "psi": psi, "term": term}
        )
    k = cfg.univ_const
    main = k * cfg.loss_lipschitz * cfg.readout_radius * scale * total_terms
    breakdown = BoundBreakdown(
        total=main + k * readout + k * confidence,
        main_term=main,
        readout_term=k * readout,
        confidence_term=k * confidence,
        per_matrix=per_matrix,
        details={"complexity_sum": total_terms},
    )
    logger.debug(f"General-p bound: total={breakdown.total:.6g}")
    return breakdown


def common_index(radii: LayerRadii) -> float:
    """Return the shared Schatten index or raise ``DomainError``."""
    values = np.unique(radii.index)
    if values.size != 1:
        raise DomainError(
            f"Common-p bound needs a single Schatten index, got {values.tolist()}"
        )
    return float(values[0])


def common_p_gamma(ell: int, radii: LayerRadii, cfg: BoundConfig, p: float) -> float:
    """Gamma^(l) = sum over kinds of gamma^{2p/(3p+2)} C_s^{2/(3p+2)}."""
    return sum(
        gamma_factor(kind, ell, radii, cfg) ** (2.0 * p / (3.0 * p + 2.0))
        * radii.cs(kind, ell) ** (2.0 / (3.0 * p + 2.0))
        for kind in KINDS
    )


def common_p_xi(radii: LayerRadii, cfg: BoundConfig) -> tuple[float, list[float]]:
    """Return Xi^(p) and the per-layer Gamma^(l) values."""
    p = common_index(radii)
    gammas = [common_p_gamma(ell, radii, cfg, p) for ell in range(1, radii.depth + 1)]
    inner = sum(
        propagation_alpha(ell, radii, cfg.act_lipschitz) ** (2.0 * p / (3.0 * p + 2.0))
        * gammas[ell - 1]
        for ell in range(1, radii.depth + 1)
    )
    xi = inner ** ((3.0 * p + 2.0) / (2.0 * (p + 2.0))) * cfg.N ** (
        (p + 1.0) / (p + 2.0)
    )
    return xi, gammas


def gap_bound_common_p(radii: LayerRadii, cfg: BoundConfig) -> BoundBreakdown:
    """Fixed-index bound when every matrix shares one Schatten index."""
    _check_sample_size(cfg)
    _check_depth(radii, cfg)
    p = common_index(radii)
    xi, gammas = common_p_xi(radii, cfg)
    n = cfg.n
    k = cfg.univ_const
    lead = cfg.loss_lipschitz * cfg.readout_radius / math.sqrt(n)
    main = k * lead * cfg.act_lipschitz ** (p / (p + 2.0)) * xi * math.sqrt(
        math.log(n * cfg.T)
    )
    readout = k * lead * math.log(n) ** 1.5
    confidence = k * cfg.loss_bound * math.sqrt(math.log(1.0 / cfg.delta) / n)
    return BoundBreakdown(
        total=main + readout + confidence,
        main_term=main,
        readout_term=readout,
        confidence_term=confidence,
        details={"p": p, "xi": xi, "gamma_per_layer": gammas},
    )


def dudley_coefficients(
    radii: LayerRadii, cfg: BoundConfig
) -> tuple[list[tuple[float, float]], float]:
    """Power-law entropy coefficients (c, nu) per matrix and the readout coefficient."""
    log_nt = math.log(cfg.n * cfg.T)
    terms = []
    for ell, kind in radii.entries():
        p = radii.p(kind, ell)
        nu = 2.0 * p / (p + 2.0)
        h = (
            cfg.act_lipschitz
            * cfg.readout_radius
            * gamma_factor(kind, ell, radii, cfg)
            * propagation_alpha(ell, radii, cfg.act_lipschitz)
            * radii.depth
        )
        c = (
            radii.cs(kind, ell) ** (2.0 / (p + 2.0))
            * h**nu
            * cfg.N ** (1.0 + p / (p + 2.0))
            * log_nt
        )
        terms.append((c, nu))
    c_out = cfg.readout_radius**2 * math.log(cfg.n)
    return terms, c_out


def gap_bound_dudley(radii: LayerRadii, cfg: BoundConfig) -> BoundBreakdown:
    """Fixed-index bound evaluated through the Dudley sum instead of its closed form."""
    _check_sample_size(cfg)
    _check_depth(radii, cfg)
    terms, c_out = dudley_coefficients(radii, cfg)
    power, last = _dudley_parts(terms, c_out, cfg.readout_radius, cfg.n)
    k = cfg.univ_const
    root_n = math.sqrt(cfg.n)
    main = k * cfg.loss_lipschitz * power / root_n
    readout = k * cfg.loss_lipschitz * last / root_n
    confidence = k * cfg.loss_bound * math.sqrt(math.log(1.0 / cfg.delta) / cfg.n)
    return BoundBreakdown(
        total=main + readout + confidence,
        main_term=main,
        readout_term=readout,
        confidence_term=confidence,
        per_matrix=[
            {"layer": ell, "kind": kind, "c": c, "nu": nu}
            for (ell, kind), (c, nu) in zip(radii.entries(), terms, strict=True)
        ],
        details={"c_out": c_out},
    )
