"""
Post hoc selection of Schatten indices.

This module contains:
- IndexGrid, ShellIndex: the index grid and dyadic shells of realized radii
- MatrixSpec: a measured matrix with its architectural factor, shared by
  theory weights and BERT checkpoints
- shell_index, shell_weight, penalty_omega: the union-bound penalty
- complexity_B, select_indices: the weight-dependent complexity and its
  grid infimum (separable, so selection is per matrix)
- chi, rounding_factor, floor_violations: grid-rounding diagnostics
- posthoc_bound, grid_bound, simplified_bound: the post hoc bound values
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from ..core.errors import DomainError, InputError
from ..utils.constants import DEFAULT_FLOOR_CONSTANT, PACKAGE_LOGGER_NAME
from ..utils.parallel import ordered_map
from .bounds import (
    BoundBreakdown,
    BoundConfig,
    LayerRadii,
    gamma_factor,
    propagation_alpha,
)
from .model import TheoryWeights
from .spectral import Spectrum, schatten_power, singular_values

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.analysis.posthoc")

# Normalizer of the shell weights: 1 + 2 * sum_{j >= 1} 1/(1+j)^2 = pi^2/3.
SHELL_NORMALIZER = math.pi**2 / 3.0
# Relative tolerance under which grid terms count as tied.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ShellIndex:
    """Dyadic shell of a Schatten power; ``j is None`` is the bottom shell."""

    j: int | None

    @property
    def is_bottom(self) -> bool:
        return self.j is None

    def __str__(self) -> str:
        return "bottom" if self.j is None else str(self.j)


@dataclass(frozen=True)
class IndexGrid:
    """The grid {0, 1/m, ..., 2} of Schatten indices."""

    m: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise DomainError(f"Grid size m must be >= 1, got {self.m}")

    @property
    def values(self) -> np.ndarray:
        return np.arange(2 * self.m + 1, dtype=np.float64) / self.m

    def project(self, p: float) -> float:
        """Upward projection ceil(m p) / m; on-grid values map to themselves."""
        if not 0.0 <= p <= 2.0:
            raise DomainError(f"Schatten index p must lie in [0, 2], got {p}")
        k = math.ceil(self.m * p - 1e-12)
        return min(max(k, 0), 2 * self.m) / self.m

    def contains(self, p: float) -> bool:
        return abs(self.project(p) - p) <= 1e-12


def default_grid_size(depth: int, width: int) -> int:
    """m = ceil(L + log N)."""
    return math.ceil(depth + math.log(width))


@dataclass(frozen=True)
class MatrixSpec:
    """A measured weight matrix and the factors its complexity term uses.

    Attributes:
        name: Stable identifier used in reports.
        kind: Matrix family (``QK``, ``V``, ``M`` or a BERT variant).
        layer: 1-based layer index.
        spectrum: Singular values of the matrix.
        local_factor: Product of the local and propagation factors.
        depth: Number of layers L.
        head: Head index for headwise matrices, else ``None``.
    """

    name: str
    kind: str
    layer: int
    spectrum: Spectrum
    local_factor: float
    depth: int
    head: int | None = None

    @property
    def architectural_factor(self) -> float:
        return self.local_factor * self.depth

    @property
    def shape(self) -> tuple[int, int]:
        return (self.spectrum.rows, self.spectrum.cols)


@dataclass
class PosthocReport:
    """Per-matrix selections and totals of the complexity 𝔅.

    ``total`` is the ordered sum of the per-matrix ``term`` entries.
    """

    records: list[dict[str, Any]]
    total: float
    omega: float | None = None
    chi: float | None = None
    m: int | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def indices(self) -> list[float]:
        return [record["p"] for record in self.records]

    def to_dict(self) -> dict[str, Any]:
        return {
            "records": self.records,
            "total": self.total,
            "omega": self.omega,
            "chi": self.chi,
            "m": self.m,
            "details": self.details,
        }


def shell_index(power: float) -> ShellIndex:
    """Bottom for 0, otherwise ceil(log2(power))."""
    if not math.isfinite(power) or power < 0:
        raise DomainError(f"Schatten power must be finite and >= 0, got {power}")
    if power == 0.0:
        return ShellIndex(None)
    j = math.ceil(math.log2(power))
    # log2 round-off near powers of two
    if 2.0**j < power:
        j += 1
    elif 2.0 ** (j - 1) >= power:
        j -= 1
    return ShellIndex(j)


def shell_weight(s: ShellIndex) -> float:
    if s.is_bottom:
        return 1.0 / SHELL_NORMALIZER
    return 1.0 / (SHELL_NORMALIZER * (1.0 + abs(s.j)) ** 2)


def penalty_omega(
    powers: Sequence[float], m: int, expected: int | None = None
) -> float:
    """K log(2m+1) + sum log(1/omega) over K matrices."""
    if expected is not None and len(powers) != expected:
        raise InputError(f"Expected {expected} Schatten powers, got {len(powers)}")
    if not powers:
        raise InputError("penalty_omega needs at least one Schatten power")
    IndexGrid(m)
    total = len(powers) * math.log(2 * m + 1)
    for power in powers:
        total += -math.log(shell_weight(shell_index(power)))
    return total


def matrix_term(spec: MatrixSpec, p: float, width: int) -> tuple[float, float]:
    """Return ``(schatten_power, term)`` for one matrix at index p."""
    power = schatten_power(spec.spectrum, p)
    term = (
        power ** (1.0 / (p + 2.0))
        * spec.architectural_factor ** (p / (p + 2.0))
        * width ** ((p + 1.0) / (p + 2.0))
    )
    return power, term


def _record(spec: MatrixSpec, p: float, power: float, term: float) -> dict[str, Any]:
    return {
        "name": spec.name,
        "layer": spec.layer,
        "kind": spec.kind,
        "head": spec.head,
        "p": p,
        "schatten_power": power,
        "term": term,
    }


def complexity_from_specs(
    specs: Sequence[MatrixSpec], p_vec: ArrayLike, width: int
) -> PosthocReport:
    p_arr = np.asarray(p_vec, dtype=np.float64).ravel()
    if p_arr.shape != (len(specs),):
        raise InputError(f"Expected {len(specs)} Schatten indices, got {p_arr.size}")
    if np.any((p_arr < 0) | (p_arr > 2)):
        raise DomainError("Schatten indices must lie in [0, 2]")
    records = []
    for spec, p in zip(specs, p_arr, strict=True):
        power, term = matrix_term(spec, float(p), width)
        records.append(_record(spec, float(p), power, term))
    return PosthocReport(records=records, total=sum(r["term"] for r in records))


def select_one(spec: MatrixSpec, grid: IndexGrid, width: int) -> dict[str, Any]:
    """Grid argmin of one matrix term; ties go to the smallest p."""
    evaluated = [(p, *matrix_term(spec, float(p), width)) for p in grid.values]
    best = min(term for _, _, term in evaluated)
    for p, power, term in evaluated:
        if term <= best * (1.0 + TIE_RTOL):
            return _record(spec, float(p), power, term)
    raise AssertionError("unreachable")


def select_from_specs(
    specs: Sequence[MatrixSpec],
    grid: IndexGrid,
    width: int,
    workers: int | None = 1,
) -> PosthocReport:
    """Per-matrix grid selection; the total is the joint grid infimum."""
    records = ordered_map(lambda spec: select_one(spec, grid, width), specs, workers)
    return PosthocReport(
        records=records, total=sum(r["term"] for r in records), m=grid.m
    )


def theory_matrix_specs(
    weights: TheoryWeights,
    radii: LayerRadii,
    cfg: BoundConfig,
    rank_tol: float | None = None,
    workers: int | None = 1,
) -> list[MatrixSpec]:
    """Measure every theory matrix and attach L_phi gamma alpha."""
    if radii.depth != weights.depth:
        raise InputError(
            f"Radii cover {radii.depth} layers but weights have {weights.depth}"
        )
    if cfg.N != weights.hidden_dim:
        raise InputError(
            f"Config width N = {cfg.N} does not match weights width "
            f"{weights.hidden_dim}"
        )

    def build(item: tuple[int, str, np.ndarray]) -> MatrixSpec:
        ell, kind, mat = item
        local = (
            cfg.act_lipschitz
            * gamma_factor(kind, ell, radii, cfg)
            * propagation_alpha(ell, radii, cfg.act_lipschitz)
        )
        return MatrixSpec(
            name=f"layer.{ell}.{kind.lower()}",
            kind=kind,
            layer=ell,
            spectrum=singular_values(mat, rank_tol),
            local_factor=local,
            depth=weights.depth,
        )

    return ordered_map(build, weights.matrices(), workers)


def complexity_B(
    weights: TheoryWeights,
    p_vec: ArrayLike,
    radii: LayerRadii,
    cfg: BoundConfig,
    rank_tol: float | None = None,
) -> PosthocReport:
    """Sum over matrices of the per-matrix posthoc term.

    Each term is (||W||_{s,p}^p)^{1/(p+2)} (L_phi gamma alpha L)^{p/(p+2)}
    N^{(p+1)/(p+2)}.
    """
    specs = theory_matrix_specs(weights, radii, cfg, rank_tol)
    return complexity_from_specs(specs, p_vec, cfg.N)


def select_indices(
    weights: TheoryWeights,
    radii: LayerRadii,
    cfg: BoundConfig,
    m: int | None = None,
    workers: int | None = 1,
    rank_tol: float | None = None,
) -> PosthocReport:
    """Minimize 𝔅 over the grid; Ω and χ are evaluated at the selection."""
    m = default_grid_size(weights.depth, cfg.N) if m is None else m
    grid = IndexGrid(m)
    specs = theory_matrix_specs(weights, radii, cfg, rank_tol, workers)
    report = select_from_specs(specs, grid, cfg.N, workers=workers)
    report.omega = penalty_omega(
        [r["schatten_power"] for r in report.records], m, expected=3 * weights.depth
    )
    report.chi = chi(specs)
    return report


def chi(specs: Sequence[MatrixSpec]) -> float:
    """max over nonzero W of |log ||W||_2| + |log(L_phi gamma alpha)|, 0 if none."""
    values = [
        abs(math.log(spec.spectrum.sigma_max)) + abs(math.log(spec.local_factor))
        for spec in specs
        if not spec.spectrum.is_zero
    ]
    return max(values, default=0.0)


def rounding_factor(chi_value: float, m: int, depth: int, width: int) -> float:
    """exp(chi/m) L^{1/(2m)} N^{1/(4m)}."""
    IndexGrid(m)
    return (
        math.exp(chi_value / m)
        * depth ** (1.0 / (2.0 * m))
        * width ** (1.0 / (4.0 * m))
    )


def floor_violations(
    specs: Sequence[MatrixSpec],
    depth: int,
    width: int,
    c0: float = DEFAULT_FLOOR_CONSTANT,
) -> list[str]:
    """Nonzero matrices whose spectral norm is below exp(-c0 (L + log N))."""
    floor = math.exp(-c0 * (depth + math.log(width)))
    names = [
        spec.name
        for spec in specs
        if not spec.spectrum.is_zero and spec.spectrum.sigma_max < floor
    ]
    if names:
        logger.warning(
            f"{len(names)} matrices fall below the spectral floor {floor:.3g}: "
            f"{', '.join(names)}"
        )
    return names


def _penalty_term(cfg: BoundConfig, omega: float) -> float:
    return cfg.loss_bound * math.sqrt((math.log(1.0 / cfg.delta) + omega) / cfg.n)


def _readout_term(cfg: BoundConfig) -> float:
    return (
        cfg.loss_lipschitz
        * cfg.readout_radius
        * math.log(cfg.n) ** 1.5
        / math.sqrt(cfg.n)
    )


def _main_scale(cfg: BoundConfig) -> float:
    return (
        cfg.loss_lipschitz
        * cfg.readout_radius
        * math.sqrt(math.log(cfg.n * cfg.T) / cfg.n)
    )


def posthoc_bound(
    weights: TheoryWeights,
    radii: LayerRadii,
    cfg: BoundConfig,
    m: int | None = None,
    p_vec: ArrayLike | None = None,
    workers: int | None = 1,
    rank_tol: float | None = None,
) -> BoundBreakdown:
    """Post hoc bound at arbitrary indices p, paid for by grid rounding.

    The main term is the rounding factor times 𝔅_p; the penalty uses Ω at
    the projected indices. Without ``p_vec`` the grid selection is used.
    """
    if cfg.n < 3:
        raise DomainError(f"Bounds require n >= 3, got {cfg.n}")
    m = default_grid_size(weights.depth, cfg.N) if m is None else m
    grid = IndexGrid(m)
    specs = theory_matrix_specs(weights, radii, cfg, rank_tol, workers)
    if p_vec is None:
        p_arr = np.asarray(select_from_specs(specs, grid, cfg.N, workers).indices)
    else:
        p_arr = np.asarray(p_vec, dtype=np.float64).ravel()
    at_p = complexity_from_specs(specs, p_arr, cfg.N)
    projected = np.array([grid.project(float(p)) for p in p_arr])
    at_grid = complexity_from_specs(specs, projected, cfg.N)
    chi_value = chi(specs)
    factor = rounding_factor(chi_value, m, weights.depth, cfg.N)
    omega = penalty_omega(
        [r["schatten_power"] for r in at_grid.records], m, expected=3 * weights.depth
    )
    violations = floor_violations(specs, weights.depth, cfg.N)
    k = cfg.univ_const
    main = k * _main_scale(cfg) * factor * at_p.total
    penalty = k * _penalty_term(cfg, omega)
    readout = k * _readout_term(cfg)
    per_matrix = [
        {**rec, "p_grid": grid_rec["p"], "term_grid": grid_rec["term"]}
        for rec, grid_rec in zip(at_p.records, at_grid.records, strict=True)
    ]
    logger.info(
        f"Post hoc bound: total={main + penalty + readout:.6g}, m={m}, "
        f"chi={chi_value:.4g}, omega={omega:.4g}"
    )
    return BoundBreakdown(
        total=main + readout + penalty,
        main_term=main,
        readout_term=readout,
        confidence_term=penalty,
        per_matrix=per_matrix,
        details={
            "m": m,
            "chi": chi_value,
            "omega": omega,
            "rounding_factor": factor,
            "complexity": at_p.total,
            "complexity_grid": at_grid.total,
            "floor_violations": violations,
            "selection_objective": "main term only; omega evaluated at the selection",
        },
    )


def grid_bound(
    weights: TheoryWeights,
    radii: LayerRadii,
    cfg: BoundConfig,
    p_vec: ArrayLike,
    m: int | None = None,
    rank_tol: float | None = None,
) -> BoundBreakdown:
    """Fixed-grid selection bound; every index must already lie on the grid."""
    if cfg.n < 3:
        raise DomainError(f"Bounds require n >= 3, got {cfg.n}")
    m = default_grid_size(weights.depth, cfg.N) if m is None else m
    grid = IndexGrid(m)
    p_arr = np.asarray(p_vec, dtype=np.float64).ravel()
    off_grid = [float(p) for p in p_arr if not grid.contains(float(p))]
    if off_grid:
        raise DomainError(f"Indices {off_grid} are not on the grid with m = {m}")
    report = complexity_B(weights, p_arr, radii, cfg, rank_tol)
    omega = penalty_omega(
        [r["schatten_power"] for r in report.records], m, expected=3 * weights.depth
    )
    k = cfg.univ_const
    main = k * _main_scale(cfg) * report.total
    penalty = k * _penalty_term(cfg, omega)
    readout = k * _readout_term(cfg)
    return BoundBreakdown(
        total=main + readout + penalty,
        main_term=main,
        readout_term=readout,
        confidence_term=penalty,
        per_matrix=report.records,
        details={"m": m, "omega": omega, "complexity": report.total},
    )


def default_propagation_constant(
    radii: LayerRadii, cfg: BoundConfig
) -> float:
    """max over matrices of (L_phi gamma alpha)^{1/L}, at least 1."""
    depth = radii.depth
    values = [
        (
            cfg.act_lipschitz
            * gamma_factor(kind, ell, radii, cfg)
            * propagation_alpha(ell, radii, cfg.act_lipschitz)
        )
        ** (1.0 / depth)
        for ell, kind in radii.entries()
    ]
    return max([1.0, *values])


def simplified_bound(
    weights: TheoryWeights,
    radii: LayerRadii,
    cfg: BoundConfig,
    c: float | None = None,
    m: int | None = None,
    rank_tol: float | None = None,
) -> BoundBreakdown:
    """Post hoc bound with every architectural factor replaced by C^L.

    The infimum runs over the default grid and separates per matrix.
    """
    if cfg.n < 3:
        raise DomainError(f"Bounds require n >= 3, got {cfg.n}")
    depth, width, n = weights.depth, cfg.N, cfg.n
    c = default_propagation_constant(radii, cfg) if c is None else c
    if c <= 0:
        raise DomainError(f"Propagation constant C must be positive, got {c}")
    m = default_grid_size(depth, width) if m is None else m
    grid = IndexGrid(m)
    specs = [
        MatrixSpec(
            name=f"layer.{ell}.{kind.lower()}",
            kind=kind,
            layer=ell,
            spectrum=singular_values(mat, rank_tol),
            local_factor=c**depth,
            depth=depth,
        )
        for ell, kind, mat in weights.matrices()
    ]
    report = select_from_specs(specs, grid, width)
    k = cfg.univ_const
    main = k * math.sqrt(math.log(n * cfg.T) / n) * report.total
    readout = k * math.log(n) ** 1.5 / math.sqrt(n)
    confidence = k * math.sqrt(
        (math.log(1.0 / cfg.delta) + depth * math.log(depth + math.log(width))) / n
    )
    return BoundBreakdown(
        total=main + readout + confidence,
        main_term=main,
        readout_term=readout,
        confidence_term=confidence,
        per_matrix=report.records,
        details={"C": c, "m": m, "complexity": report.total},
    )
