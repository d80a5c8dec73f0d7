"""
BERT-adapted leading-factor proxies.

Each attention head is treated as a single-head component through its
composed N x N query-key and value-output matrices; the feedforward
sublayer contributes its input and output matrices separately. All radii
are the measured norms of the checkpoint's matrices.

This module contains:
- BertCheckpoint, MeasuredMatrix, BertLayerNorms, ScalingCurve
- compose_heads, bert_alpha, bert_gamma, bert_matrix_term
- measure_checkpoint, b_ours, b_edelman, analyze_checkpoint
- normalize_curves, p_sweep_diagnostic, spectra_dump, norm_scaling_rows
- block_partition_check
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import ArrayLike

from ..core.errors import DomainError, InputError
from ..utils.constants import GELU_LIPSCHITZ, PACKAGE_LOGGER_NAME
from ..utils.parallel import ordered_map
from .posthoc import (
    IndexGrid,
    MatrixSpec,
    PosthocReport,
    chi,
    default_grid_size,
    matrix_term,
    penalty_omega,
    select_from_specs,
)
from .spectral import (
    Spectrum,
    as_matrix,
    frobenius_norm,
    mixed_norm,
    numerical_rank,
    singular_values,
)

if TYPE_CHECKING:
    from ..utils.config import AnalysisSettings

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.analysis.bertproxy")

BERT_KINDS = ("QK", "V", "M_in", "M_out")


@dataclass(frozen=True)
class BertCheckpoint:
    """Composed BERT encoder matrices in row-vector orientation.

    Attributes:
        depth: Number of encoder layers L.
        width: Hidden dimension N.
        head_dim: Per-head dimension d_h; the head count is N / d_h.
        intermediate: Feedforward width I.
        qk: Per layer, per head composed query-key matrices (N x N).
        vo: Per layer, per head composed value-output matrices (N x N).
        m_in: Per layer feedforward input matrices (N x I).
        m_out: Per layer feedforward output matrices (I x N).
        name: Label used in reports.
    """

    depth: int
    width: int
    head_dim: int
    intermediate: int
    qk: list[list[np.ndarray]]
    vo: list[list[np.ndarray]]
    m_in: list[np.ndarray]
    m_out: list[np.ndarray]
    name: str = ""

    def __post_init__(self) -> None:
        if self.depth < 1 or self.width < 1 or self.head_dim < 1:
            raise InputError("Checkpoint dimensions must be positive")
        if self.width % self.head_dim:
            raise InputError(
                f"Hidden dimension {self.width} is not divisible by head dim "
                f"{self.head_dim}"
            )
        for name in ("qk", "vo", "m_in", "m_out"):
            if len(getattr(self, name)) != self.depth:
                raise InputError(f"{name} must have one entry per layer")
        square = (self.width, self.width)
        for ell in range(self.depth):
            for name, heads in (("qk", self.qk[ell]), ("vo", self.vo[ell])):
                if len(heads) != self.heads:
                    raise InputError(
                        f"Layer {ell + 1} {name} has {len(heads)} heads, "
                        f"expected {self.heads}"
                    )
                if any(mat.shape != square for mat in heads):
                    raise InputError(f"Layer {ell + 1} {name} matrices must be N x N")
            if self.m_in[ell].shape != (self.width, self.intermediate):
                raise InputError(f"Layer {ell + 1} feedforward input must be N x I")
            if self.m_out[ell].shape != (self.intermediate, self.width):
                raise InputError(f"Layer {ell + 1} feedforward output must be I x N")

    @property
    def heads(self) -> int:
        return self.width // self.head_dim

    def matrices(self) -> list[tuple[str, int, str, int | None, np.ndarray]]:
        """``(name, layer, kind, head, matrix)`` ordered by layer, kind, head."""
        out: list[tuple[str, int, str, int | None, np.ndarray]] = []
        for ell in range(1, self.depth + 1):
            for h, mat in enumerate(self.qk[ell - 1]):
                out.append((f"layer.{ell}.qk.head{h}", ell, "QK", h, mat))
            for h, mat in enumerate(self.vo[ell - 1]):
                out.append((f"layer.{ell}.v.head{h}", ell, "V", h, mat))
            out.append((f"layer.{ell}.m_in", ell, "M_in", None, self.m_in[ell - 1]))
            out.append((f"layer.{ell}.m_out", ell, "M_out", None, self.m_out[ell - 1]))
        return out


@dataclass(frozen=True)
class MeasuredMatrix:
    """Spectrum and mixed norms of one checkpoint matrix.

    ``mixed21`` of a query-key matrix is measured on its transpose.
    """

    name: str
    layer: int
    kind: str
    head: int | None
    spectrum: Spectrum
    mixed21: float
    mixed11: float
    frobenius: float

    @property
    def spectral(self) -> float:
        return self.spectrum.sigma_max


@dataclass(frozen=True)
class BertLayerNorms:
    """Measured spectral norms of one layer."""

    qk: tuple[float, ...]
    vo: tuple[float, ...]
    m_in: float
    m_out: float


@dataclass
class ScalingCurve:
    """Raw proxy values over checkpoints and their normalization to the base."""

    points: list[tuple[int, int, float]]
    normalized: list[float]

    @property
    def base(self) -> tuple[int, int]:
        return min((depth, width) for depth, width, _ in self.points)


@dataclass
class BOursResult:
    value: float
    indices: list[float]
    report: PosthocReport


@dataclass
class CheckpointAnalysis:
    """Everything the analyzer reports for one checkpoint."""

    checkpoint: BertCheckpoint
    measured: list[MeasuredMatrix]
    b_ours: BOursResult
    b_edelman: float
    rank_cap_violations: list[str] = field(default_factory=list)


def compose_heads(
    query: ArrayLike, key: ArrayLike, value: ArrayLike, output: ArrayLike
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(W_qk, W_vtilde)`` = ``(Q^T K, V O)`` for one head.

    ``query`` and ``key`` are d_h x N, ``value`` is N x d_h and ``output`` is
    d_h x N, all in row-vector orientation.
    """
    q, k, v, o = (as_matrix(x) for x in (query, key, value, output))
    head_dim, width = q.shape
    if k.shape != (head_dim, width):
        raise InputError(f"Key slice {k.shape} does not match query slice {q.shape}")
    if v.shape != (width, head_dim):
        raise InputError(f"Value slice must be {width} x {head_dim}, got {v.shape}")
    if o.shape != (head_dim, width):
        raise InputError(f"Output slice must be {head_dim} x {width}, got {o.shape}")
    return q.T @ k, v @ o


def _measure(
    item: tuple[str, int, str, int | None, np.ndarray], rank_tol: float | None
) -> MeasuredMatrix:
    name, ell, kind, head, mat = item
    logger.debug(f"Measuring {name} {mat.shape}")
    return MeasuredMatrix(
        name=name,
        layer=ell,
        kind=kind,
        head=head,
        spectrum=singular_values(mat, rank_tol),
        mixed21=mixed_norm(mat.T if kind == "QK" else mat, 2, 1),
        mixed11=mixed_norm(mat, 1, 1),
        frobenius=frobenius_norm(mat),
    )


def measure_checkpoint(
    ckpt: BertCheckpoint,
    rank_tol: float | None = None,
    workers: int | None = None,
) -> list[MeasuredMatrix]:
    """SVD and mixed norms of every matrix, in checkpoint order."""
    measured = ordered_map(
        lambda item: _measure(item, rank_tol), ckpt.matrices(), workers
    )
    name = ckpt.name or "<unnamed>"
    logger.info(f"Measured {len(measured)} matrices of checkpoint {name}")
    return measured


def layer_norms(
    ckpt: BertCheckpoint, measured: Sequence[MeasuredMatrix]
) -> list[BertLayerNorms]:
    """Group measured spectral norms by layer."""
    norms = []
    for ell in range(1, ckpt.depth + 1):
        layer = [m for m in measured if m.layer == ell]
        norms.append(
            BertLayerNorms(
                qk=tuple(m.spectral for m in layer if m.kind == "QK"),
                vo=tuple(m.spectral for m in layer if m.kind == "V"),
                m_in=next(m.spectral for m in layer if m.kind == "M_in"),
                m_out=next(m.spectral for m in layer if m.kind == "M_out"),
            )
        )
    return norms


def bert_alpha(
    ell: int, norms: Sequence[BertLayerNorms], act_lipschitz: float = GELU_LIPSCHITZ
) -> float:
    """Product over later layers of the per-layer Lipschitz proxy.

    Each factor is L_phi C2^{M,in} C2^{M,out} sum_h C2^{V,h}(1 + 4 C2^{QK,h}).
    """
    if not 1 <= ell <= len(norms):
        raise InputError(f"Layer index {ell} out of range [1, {len(norms)}]")
    alpha = 1.0
    for layer in norms[ell:]:
        head_sum = sum(
            vo * (1.0 + 4.0 * qk) for qk, vo in zip(layer.qk, layer.vo, strict=True)
        )
        alpha *= act_lipschitz * layer.m_in * layer.m_out * head_sum
    return alpha


def bert_gamma(kind: str, layer: BertLayerNorms, head: int | None = None) -> float:
    """Local factor of a BERT matrix; no input-bound factor appears."""
    if kind == "QK":
        return 2.0 * layer.vo[head] * layer.m_out * layer.m_in
    if kind == "V":
        return layer.m_out * layer.m_in
    if kind == "M_in":
        return layer.m_out
    if kind == "M_out":
        return 1.0
    raise DomainError(
        f"Unknown BERT matrix kind '{kind}'. Expected one of {BERT_KINDS}"
    )


def bert_matrix_term(
    w: ArrayLike | Spectrum,
    p: float,
    alpha_tilde: float,
    gamma_tilde: float,
    width: int,
    depth: int,
) -> float:
    """(||W||_{s,p}^p)^{1/(p+2)} (gamma alpha L)^{p/(p+2)} N^{(p+1)/(p+2)}."""
    spectrum = w if isinstance(w, Spectrum) else singular_values(w)
    spec = MatrixSpec(
        name="matrix",
        kind="",
        layer=1,
        spectrum=spectrum,
        local_factor=gamma_tilde * alpha_tilde,
        depth=depth,
    )
    return matrix_term(spec, p, width)[1]


def bert_matrix_specs(
    ckpt: BertCheckpoint,
    measured: Sequence[MeasuredMatrix],
    act_lipschitz: float = GELU_LIPSCHITZ,
) -> list[MatrixSpec]:
    norms = layer_norms(ckpt, measured)
    alphas = [bert_alpha(ell, norms, act_lipschitz) for ell in range(1, ckpt.depth + 1)]
    return [
        MatrixSpec(
            name=m.name,
            kind=m.kind,
            layer=m.layer,
            spectrum=m.spectrum,
            local_factor=bert_gamma(m.kind, norms[m.layer - 1], m.head)
            * alphas[m.layer - 1],
            depth=ckpt.depth,
            head=m.head,
        )
        for m in measured
    ]


def b_ours(
    ckpt: BertCheckpoint,
    m: int | None = None,
    act_lipschitz: float = GELU_LIPSCHITZ,
    measured: Sequence[MeasuredMatrix] | None = None,
    workers: int | None = None,
) -> BOursResult:
    """Grid infimum of the BERT complexity plus sqrt(L)."""
    m = default_grid_size(ckpt.depth, ckpt.width) if m is None else m
    if measured is None:
        measured = measure_checkpoint(ckpt, workers=workers)
    specs = bert_matrix_specs(ckpt, measured, act_lipschitz)
    report = select_from_specs(specs, IndexGrid(m), ckpt.width, workers=workers)
    report.omega = penalty_omega([r["schatten_power"] for r in report.records], m)
    report.chi = chi(specs)
    value = report.total + math.sqrt(ckpt.depth)
    report.details["sqrt_depth"] = math.sqrt(ckpt.depth)
    return BOursResult(value=value, indices=report.indices, report=report)


def b_edelman(
    ckpt: BertCheckpoint,
    act_lipschitz: float = GELU_LIPSCHITZ,
    measured: Sequence[MeasuredMatrix] | None = None,
    workers: int | None = None,
) -> float:
    """(1 + sum_l alpha^{2/3} xi^(l))^{3/2} from measured spectral and (2,1) norms."""
    if measured is None:
        measured = measure_checkpoint(ckpt, workers=workers)
    norms = layer_norms(ckpt, measured)
    inner = 0.0
    for ell in range(1, ckpt.depth + 1):
        layer = norms[ell - 1]
        rows = [mm for mm in measured if mm.layer == ell]
        qk21 = [mm.mixed21 for mm in rows if mm.kind == "QK"]
        vo21 = [mm.mixed21 for mm in rows if mm.kind == "V"]
        m_in21 = next(mm.mixed21 for mm in rows if mm.kind == "M_in")
        m_out21 = next(mm.mixed21 for mm in rows if mm.kind == "M_out")
        ffn = layer.m_out * layer.m_in
        xi = (
            sum(
                (ffn * vo * c21) ** (2.0 / 3.0)
                for vo, c21 in zip(layer.vo, qk21, strict=True)
            )
            + sum((ffn * c21) ** (2.0 / 3.0) for c21 in vo21)
            + (layer.m_out * m_in21) ** (2.0 / 3.0)
            + m_out21 ** (2.0 / 3.0)
        )
        inner += bert_alpha(ell, norms, act_lipschitz) ** (2.0 / 3.0) * xi
    return (1.0 + inner) ** 1.5


def rank_cap_violations(
    ckpt: BertCheckpoint, measured: Sequence[MeasuredMatrix]
) -> list[str]:
    """Composed attention matrices whose numerical rank exceeds d_h."""
    names = [
        mm.name
        for mm in measured
        if mm.kind in ("QK", "V") and numerical_rank(mm.spectrum) > ckpt.head_dim
    ]
    if names:
        logger.warning(
            f"{len(names)} composed attention matrices exceed rank {ckpt.head_dim} "
            f"at the current tolerance"
        )
    return names


def analyze_checkpoint(
    ckpt: BertCheckpoint, settings: "AnalysisSettings"
) -> CheckpointAnalysis:
    """Measure every matrix once and evaluate both proxies."""
    measured = measure_checkpoint(ckpt, settings.rank_tol, settings.workers)
    lphi = settings.bound.act_lipschitz
    ours = b_ours(ckpt, settings.grid_size, lphi, measured, settings.workers)
    edelman = b_edelman(ckpt, lphi, measured)
    logger.info(
        f"{ckpt.name or 'checkpoint'}: "
        f"B_ours={ours.value:.6g}, B_edelman={edelman:.6g}"
    )
    return CheckpointAnalysis(
        checkpoint=ckpt,
        measured=measured,
        b_ours=ours,
        b_edelman=edelman,
        rank_cap_violations=rank_cap_violations(ckpt, measured),
    )


def normalize_curves(points: Sequence[tuple[int, int, float]]) -> ScalingCurve:
    """Divide every raw value by the value at (smallest L, smallest N)."""
    if not points:
        raise InputError("normalize_curves needs at least one point")
    base_key = (min(p[0] for p in points), min(p[1] for p in points))
    base = [value for depth, width, value in points if (depth, width) == base_key]
    if not base:
        raise InputError(f"Base point L={base_key[0]}, N={base_key[1]} is missing")
    if base[0] <= 0:
        raise DomainError(f"Base value must be positive, got {base[0]}")
    return ScalingCurve(
        points=[(int(d), int(w), float(v)) for d, w, v in points],
        normalized=[float(v) / base[0] for _, _, v in points],
    )


def p_sweep_diagnostic(
    ckpt: BertCheckpoint,
    p_grid: Sequence[float],
    act_lipschitz: float = GELU_LIPSCHITZ,
    measured: Sequence[MeasuredMatrix] | None = None,
) -> list[dict[str, Any]]:
    """Per-matrix term(p) / term(0); zero matrices are flagged with no ratio."""
    measured = measure_checkpoint(ckpt) if measured is None else measured
    specs = bert_matrix_specs(ckpt, measured, act_lipschitz)
    rows = []
    for spec in specs:
        _, base = matrix_term(spec, 0.0, ckpt.width)
        for p in p_grid:
            row = {
                "name": spec.name,
                "layer": spec.layer,
                "kind": spec.kind,
                "head": spec.head,
                "p": float(p),
            }
            if base == 0.0:
                row.update(ratio=None, degenerate=True)
            else:
                _, term = matrix_term(spec, float(p), ckpt.width)
                row.update(ratio=term / base, degenerate=False)
            rows.append(row)
    return rows


def spectra_dump(
    ckpt: BertCheckpoint, measured: Sequence[MeasuredMatrix] | None = None
) -> list[dict[str, Any]]:
    """One row per singular value of every matrix."""
    measured = measure_checkpoint(ckpt) if measured is None else measured
    return [
        {
            "name": mm.name,
            "layer": mm.layer,
            "kind": mm.kind,
            "head": mm.head,
            "index": i,
            "sigma": float(sigma),
        }
        for mm in measured
        for i, sigma in enumerate(mm.spectrum.values, start=1)
    ]


def norm_scaling_rows(
    ckpt: BertCheckpoint, measured: Sequence[MeasuredMatrix] | None = None
) -> list[dict[str, Any]]:
    """Per-matrix (2,1), (1,1), Frobenius and spectral norms."""
    measured = measure_checkpoint(ckpt) if measured is None else measured
    return [
        {
            "L": ckpt.depth,
            "N": ckpt.width,
            "name": mm.name,
            "layer": mm.layer,
            "kind": mm.kind,
            "head": mm.head,
            "mixed21": mm.mixed21,
            "mixed11": mm.mixed11,
            "frobenius": mm.frobenius,
            "spectral": mm.spectral,
            "rank": numerical_rank(mm.spectrum),
        }
        for mm in measured
    ]


def block_partition_check(
    w: ArrayLike, blocks: int, axis: str = "columns"
) -> dict[str, Any]:
    """Compare ||W||_{2,1} with the sum over an equal block partition.

    Column blocks separate exactly. Row blocks satisfy
    sum / sqrt(blocks) <= ||W||_{2,1} <= sum.
    """
    arr = as_matrix(w)
    if axis not in ("columns", "rows"):
        raise InputError(f"axis must be 'columns' or 'rows', got {axis!r}")
    size = arr.shape[1] if axis == "columns" else arr.shape[0]
    if blocks < 1 or size % blocks:
        raise InputError(f"Cannot split {size} {axis} into {blocks} equal blocks")
    parts = np.split(arr, blocks, axis=1 if axis == "columns" else 0)
    total = mixed_norm(arr, 2, 1)
    block_sum = sum(mixed_norm(part, 2, 1) for part in parts)
    lower = block_sum if axis == "columns" else block_sum / math.sqrt(blocks)
    return {
        "axis": axis,
        "blocks": blocks,
        "total": total,
        "block_sum": block_sum,
        "lower": lower,
        "upper": block_sum,
        "holds": lower * (1.0 - 1e-12) <= total <= block_sum * (1.0 + 1e-12),
    }
