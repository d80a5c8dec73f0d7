"""
Covering-entropy evaluators for the simplified Transformer.

``interp_entropy`` bounds the 2->inf log-covering number of
``{X -> X W}`` over a Schatten ball by splitting W into a low-rank head
and a Frobenius tail. The head, block, multi-layer and scalar-output
evaluators compose it layer by layer. The scalar-entropy functions give
the objective over per-matrix covering scales and its two closed forms.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..core.errors import DomainError, InputError
from ..utils.constants import PACKAGE_LOGGER_NAME
from .bounds import (
    KINDS,
    BoundConfig,
    LayerRadii,
    allocate_radii,
    beta_factor,
    common_index,
    common_p_gamma,
    gamma_factor,
    propagation_alpha,
)

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.analysis.entropy")


@dataclass(frozen=True)
class EntropyEstimate:
    """Covering radius and log-covering bound of a function class."""

    radius: float
    log_covering: float
    parts: dict[str, float] = field(default_factory=dict)


def balanced_tau(
    dims: tuple[int, int], p: float, cs: float, row_bound: float, eps: float
) -> float:
    """Threshold equating the leading low-rank and tail terms."""
    rows, cols = dims
    short = min(rows, cols)
    return (cs * (rows + cols) * eps**2 / (row_bound**2 * short * cols)) ** (
        1.0 / (p + 2.0)
    )


def interp_terms(
    dims: tuple[int, int],
    p: float,
    cs: float,
    c2: float,
    row_bound: float,
    eps: float,
    n: int,
    d: int,
    tau: float,
) -> tuple[float, float]:
    """Low-rank and tail terms of the interpolation bound at threshold ``tau``."""
    rows, cols = dims
    short = min(rows, cols)
    if cs == 0.0:
        return 0.0, 0.0
    if tau <= 0:
        raise DomainError(f"Threshold tau must be positive, got {tau}")
    head_count = cs if p == 0.0 else cs / tau**p
    low_rank = (rows + cols) * head_count * math.log(
        32.0 * math.sqrt(cs) * c2 * row_bound / (tau ** (p / 2.0) * eps) + 1.0
    )
    a = tau * math.sqrt(short)
    eps_tail = eps / 4.0
    tail = (
        144.0
        * a**2
        * row_bound**2
        * cols
        / eps_tail**2
        * math.log(20.0 * math.ceil(8.0 * a * row_bound / eps_tail + 2.0) * n * d)
    )
    return low_rank, tail


def interp_entropy(
    dims: tuple[int, int],
    p: float,
    cs: float,
    c2: float,
    row_bound: float,
    eps: float,
    n: int,
    d: int,
    tau: float | None = None,
) -> tuple[float, float]:
    """Log-covering bound of a Schatten-ball linear class in the 2->inf metric.

    Args:
        dims: ``(rows, cols)`` of the weight matrix.
        p: Schatten index in [0, 2]; at 0, ``cs`` is a rank bound.
        cs: Schatten radius (Schatten power bound).
        c2: Spectral radius.
        row_bound: Bound on the input rows.
        eps: Covering scale.
        n: Number of sequences.
        d: Rows per sequence.
        tau: Threshold override; defaults to :func:`balanced_tau`.

    Returns:
        ``(bound, tau)``. A zero Schatten radius gives ``(0.0, 0.0)``.
    """
    if eps <= 0:
        raise DomainError(f"Covering scale must be positive, got {eps}")
    if not 0.0 <= p <= 2.0:
        raise DomainError(f"Schatten index p must lie in [0, 2], got {p}")
    if cs < 0 or c2 <= 0 or row_bound <= 0:
        raise DomainError("interp_entropy requires cs >= 0 and c2, B > 0")
    if min(dims) < 1 or n < 1 or d < 1:
        raise InputError(
            f"Dimensions and counts must be positive, got {dims}, {n}, {d}"
        )
    if cs == 0.0:
        return 0.0, 0.0
    if tau is None:
        tau = balanced_tau(dims, p, cs, row_bound, eps)
    low_rank, tail = interp_terms(dims, p, cs, c2, row_bound, eps, n, d, tau)
    return low_rank + tail, tau


def _matrix_entropy(
    kind: str,
    ell: int,
    radii: LayerRadii,
    cfg: BoundConfig,
    eps: float,
    row_bound: float,
) -> float:
    bound, _ = interp_entropy(
        (cfg.N, cfg.N),
        radii.p(kind, ell),
        radii.cs(kind, ell),
        radii.c2(kind, ell),
        row_bound,
        eps,
        cfg.n,
        cfg.T,
    )
    return bound


def head_entropy(
    radii: LayerRadii,
    ell: int,
    cfg: BoundConfig,
    eps_qk: float,
    eps_v: float,
    row_bound: float | None = None,
) -> EntropyEstimate:
    """Attention head class: radius 2 C2^V B^2 eps_qk + eps_v."""
    b = cfg.input_row_bound if row_bound is None else row_bound
    h_qk = _matrix_entropy("QK", ell, radii, cfg, eps_qk, b)
    h_v = _matrix_entropy("V", ell, radii, cfg, eps_v, b)
    radius = 2.0 * radii.c2("V", ell) * b**2 * eps_qk + eps_v
    return EntropyEstimate(radius, h_qk + h_v, {"QK": h_qk, "V": h_v})


def block_entropy(
    radii: LayerRadii,
    ell: int,
    cfg: BoundConfig,
    eps_qk: float,
    eps_v: float,
    eps_m: float,
    row_bound: float | None = None,
) -> EntropyEstimate:
    """Normalized block class; the feedforward input is bounded by L_phi."""
    b = cfg.input_row_bound if row_bound is None else row_bound
    head = head_entropy(radii, ell, cfg, eps_qk, eps_v, row_bound=b)
    h_m = _matrix_entropy("M", ell, radii, cfg, eps_m, cfg.act_lipschitz)
    lphi = cfg.act_lipschitz
    c2_m = radii.c2("M", ell)
    radius = (
        2.0 * lphi * radii.c2("V", ell) * c2_m * b**2 * eps_qk
        + lphi * c2_m * eps_v
        + eps_m
    )
    return EntropyEstimate(radius, head.log_covering + h_m, {**head.parts, "M": h_m})


def _check_eps_matrix(eps: np.ndarray, depth: int) -> np.ndarray:
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (depth, 3):
        raise InputError(
            f"Covering scales must have shape ({depth}, 3), got {eps.shape}"
        )
    if np.any(eps <= 0):
        raise DomainError("Covering scales must be positive")
    return eps


def multilayer_entropy(
    radii: LayerRadii, cfg: BoundConfig, eps: np.ndarray
) -> EntropyEstimate:
    """L-layer class; only the first layer sees the input row bound B.

    The radius is eta = sum over layers of alpha^(l) times the block radius.
    """
    eps = _check_eps_matrix(eps, radii.depth)
    eta = 0.0
    total = 0.0
    parts: dict[str, float] = {}
    for ell in range(1, radii.depth + 1):
        row_bound = cfg.input_row_bound if ell == 1 else 1.0
        block = block_entropy(radii, ell, cfg, *eps[ell - 1], row_bound=row_bound)
        eta += propagation_alpha(ell, radii, cfg.act_lipschitz) * block.radius
        total += block.log_covering
        parts.update({f"{kind}{ell}": value for kind, value in block.parts.items()})
    return EntropyEstimate(eta, total, parts)


def output_entropy(
    radii: LayerRadii, cfg: BoundConfig, eps: np.ndarray, eps_out: float
) -> EntropyEstimate:
    """Scalar output class: radius C_out eta + eps_out."""
    if eps_out <= 0:
        raise DomainError(f"Readout covering scale must be positive, got {eps_out}")
    inner = multilayer_entropy(radii, cfg, eps)
    readout = (cfg.readout_radius / eps_out) ** 2 * math.log(cfg.n)
    return EntropyEstimate(
        cfg.readout_radius * inner.radius + eps_out,
        inner.log_covering + readout,
        {**inner.parts, "readout": readout},
    )


def entropy_scale(kind: str, ell: int, radii: LayerRadii, cfg: BoundConfig) -> float:
    """Lambda coefficient of the power-law entropy of one matrix."""
    p = radii.p(kind, ell)
    cs = radii.cs(kind, ell)
    if kind in ("QK", "V"):
        first = 1.0 if ell == 1 else 0.0
        base = cs**2 * cfg.input_row_bound ** (2.0 * first * p) * cfg.N**p
    elif kind == "M":
        base = cs**2 * cfg.act_lipschitz ** (2.0 * p) * cfg.N**p
    else:
        raise DomainError(f"Unknown matrix kind '{kind}'. Expected one of {KINDS}")
    return base ** (1.0 / (p + 2.0))


def entropy_exponent(p: float) -> float:
    """nu = 2p / (p + 2)."""
    return 2.0 * p / (p + 2.0)


def scalar_entropy_objective(
    radii: LayerRadii, cfg: BoundConfig, eps_matrix: np.ndarray, eps_out: float
) -> float:
    """sum Lambda eps^{-nu} N log(nT) + (C_out / eps_out)^2 log n."""
    eps_matrix = _check_eps_matrix(eps_matrix, radii.depth)
    if eps_out <= 0:
        raise DomainError(f"Readout covering scale must be positive, got {eps_out}")
    log_nt = math.log(cfg.n * cfg.T)
    total = 0.0
    for ell, kind in radii.entries():
        nu = entropy_exponent(radii.p(kind, ell))
        scale = entropy_scale(kind, ell, radii, cfg)
        eps = eps_matrix[ell - 1, KINDS.index(kind)]
        total += scale * eps ** (-nu) * cfg.N * log_nt
    return total + (cfg.readout_radius / eps_out) ** 2 * math.log(cfg.n)


def balanced_epsilon_allocation(
    radii: LayerRadii, cfg: BoundConfig, eps: float
) -> tuple[np.ndarray, float]:
    """Split eps so every beta-weighted matrix scale equals eps / (6L).

    Returns the ``(L, 3)`` matrix scales and the readout scale eps / 2.
    """
    if eps <= 0:
        raise DomainError(f"Covering scale must be positive, got {eps}")
    share = eps / (6.0 * radii.depth)
    scales = np.array(
        [
            [share / beta_factor(kind, ell, radii, cfg) for kind in KINDS]
            for ell in range(1, radii.depth + 1)
        ]
    )
    return scales, eps / 2.0


def optimal_epsilon_allocation(
    radii: LayerRadii, cfg: BoundConfig, eps: float, eps_out: float | None = None
) -> tuple[np.ndarray, float]:
    """Minimize the scalar-entropy objective over matrix scales (common p > 0).

    The beta-weighted scales sum to ``eps - eps_out``.
    """
    p = common_index(radii)
    if p == 0.0:
        raise DomainError("Optimal allocation needs a positive common index")
    eps_out = eps / 2.0 if eps_out is None else eps_out
    if not 0.0 < eps_out < eps:
        raise DomainError(f"Readout scale must lie in (0, {eps}), got {eps_out}")
    log_nt = math.log(cfg.n * cfg.T)
    entries = radii.entries()
    a = [entropy_scale(kind, ell, radii, cfg) * cfg.N * log_nt for ell, kind in entries]
    b = [beta_factor(kind, ell, radii, cfg) for ell, kind in entries]
    result = allocate_radii(a, b, eps - eps_out, entropy_exponent(p))
    return result.z.reshape(radii.depth, 3), eps_out


def scalar_entropy_general_p(radii: LayerRadii, cfg: BoundConfig, eps: float) -> float:
    """Closed-form scalar entropy with per-matrix indices, constants dropped."""
    if eps <= 0:
        raise DomainError(f"Covering scale must be positive, got {eps}")
    log_nt = math.log(cfg.n * cfg.T)
    total = 0.0
    for ell, kind in radii.entries():
        p = radii.p(kind, ell)
        scale = (
            cfg.act_lipschitz
            * cfg.readout_radius
            * gamma_factor(kind, ell, radii, cfg)
            * propagation_alpha(ell, radii, cfg.act_lipschitz)
            * radii.depth
            / eps
        )
        total += (
            radii.cs(kind, ell) ** (2.0 / (p + 2.0))
            * scale ** entropy_exponent(p)
            * cfg.N ** (1.0 + p / (p + 2.0))
            * log_nt
        )
    return total + (cfg.readout_radius / eps) ** 2 * math.log(cfg.n)


def scalar_entropy_common_p(radii: LayerRadii, cfg: BoundConfig, eps: float) -> float:
    """Closed-form scalar entropy under one shared index, constants dropped."""
    if eps <= 0:
        raise DomainError(f"Covering scale must be positive, got {eps}")
    p = common_index(radii)
    inner = sum(
        propagation_alpha(ell, radii, cfg.act_lipschitz) ** (2.0 * p / (3.0 * p + 2.0))
        * common_p_gamma(ell, radii, cfg, p)
        for ell in range(1, radii.depth + 1)
    )
    main = (
        (cfg.act_lipschitz * cfg.readout_radius / eps) ** entropy_exponent(p)
        * inner ** ((3.0 * p + 2.0) / (p + 2.0))
        * cfg.N ** (1.0 + p / (p + 2.0))
        * math.log(cfg.n * cfg.T)
    )
    return main + (cfg.readout_radius / eps) ** 2 * math.log(cfg.n)
