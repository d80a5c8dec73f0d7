"""
Analysis orchestration shared by every CLI command.

Each ``run_*`` function takes opened weight sources and resolved settings
and returns records ready for emission; nothing here writes to stdout.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from providers.local import open_source

from .analysis.baselines import (
    REGIMES,
    edelman_factor,
    mixed_radii_from_weights,
    regime_table,
    trauger_factor,
)
from .analysis.bertproxy import (
    ScalingCurve,
    analyze_checkpoint,
    measure_checkpoint,
    norm_scaling_rows,
    normalize_curves,
    p_sweep_diagnostic,
    spectra_dump,
)
from .analysis.bounds import BoundConfig, LayerRadii, gap_bound_general_p
from .analysis.model import TheoryWeights, random_theory_weights
from .analysis.posthoc import (
    IndexGrid,
    default_grid_size,
    grid_bound,
    posthoc_bound,
    select_indices,
    simplified_bound,
)
from .core.contracts import WeightSource
from .core.errors import DomainError, InputError
from .ingest.layout import file_digest, map_theory_layout, read_table
from .ingest.synth import SynthSpec, synth_checkpoint
from .ingest.tensorfile import write_safetensors
from .reports.records import AnalysisReport, build_analysis_report
from .utils.config import AnalysisSettings
from .utils.constants import DEFAULT_SEED, PACKAGE_LOGGER_NAME, REPORT_SCHEMA_VERSION

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.pipeline")


def open_sources(
    paths: Sequence[str | Path], settings: AnalysisSettings
) -> list[WeightSource]:
    return [open_source(path, settings.prefix, settings.head_dim) for path in paths]


def _provenance(
    source: WeightSource, settings: AnalysisSettings, version: str
) -> dict[str, Any]:
    return {
        **source.provenance(),
        "tool_version": version,
        "rank_tol": settings.rank_tol,
    }


def run_analysis(
    source: WeightSource, settings: AnalysisSettings, version: str
) -> AnalysisReport:
    """Analyze one checkpoint into a report whose totals recompute exactly."""
    ckpt = source.load_checkpoint()
    logger.info(
        f"Analyzing {source.name}: L={ckpt.depth}, N={ckpt.width}, "
        f"heads={ckpt.heads}, I={ckpt.intermediate}"
    )
    analysis = analyze_checkpoint(ckpt, settings)
    return build_analysis_report(
        analysis, settings.echo(), _provenance(source, settings, version)
    )


@dataclass
class CompareResult:
    """Scaling curves of both proxies over a set of checkpoints.

    ``axis`` is ``L`` when all checkpoints share N, ``N`` when they share L
    and ``L`` (one series per N) when both vary.
    """

    rows: list[dict[str, Any]]
    axis: str
    ours: ScalingCurve
    edelman: ScalingCurve

    def series(self, normalized: bool = True) -> dict[str, list[tuple[float, float]]]:
        """Chart series keyed by label, x taken from the sweep axis."""
        suffix = "norm" if normalized else "raw"
        other = "N" if self.axis == "L" else "L"
        groups = sorted({row[other] for row in self.rows})
        out: dict[str, list[tuple[float, float]]] = {}
        for proxy in ("B_ours", "B_edelman"):
            for value in groups:
                label = proxy if len(groups) == 1 else f"{proxy} ({other}={value})"
                out[label] = [
                    (float(row[self.axis]), float(row[f"{proxy}_{suffix}"]))
                    for row in self.rows
                    if row[other] == value
                ]
        return out


def sweep_axis(points: Sequence[tuple[int, int]]) -> str:
    """Detect the sweep axis; duplicated (L, N) points are an error."""
    if len(points) < 2:
        raise InputError(f"compare needs at least two checkpoints, got {len(points)}")
    duplicates = sorted({p for p in points if points.count(p) > 1})
    if duplicates:
        raise InputError(
            f"Inconsistent sweep axis: repeated (L, N) points {duplicates}"
        )
    depths = {depth for depth, _ in points}
    widths = {width for _, width in points}
    if len(widths) == 1:
        return "L"
    if len(depths) == 1:
        return "N"
    return "L"


def run_compare(
    sources: Sequence[WeightSource], settings: AnalysisSettings
) -> CompareResult:
    """B_ours and B_Edelman per checkpoint, normalized to (min L, min N)."""
    analyses = []
    for source in sources:
        ckpt = source.load_checkpoint()
        analyses.append(analyze_checkpoint(ckpt, settings))
    analyses.sort(key=lambda a: (a.checkpoint.depth, a.checkpoint.width))
    keys = [(a.checkpoint.depth, a.checkpoint.width) for a in analyses]
    axis = sweep_axis(keys)
    ours = normalize_curves(
        [(d, w, a.b_ours.value) for (d, w), a in zip(keys, analyses, strict=True)]
    )
    edelman = normalize_curves(
        [(d, w, a.b_edelman) for (d, w), a in zip(keys, analyses, strict=True)]
    )
    rows = [
        {
            "L": depth,
            "N": width,
            "B_ours_raw": ours.points[i][2],
            "B_edelman_raw": edelman.points[i][2],
            "B_ours_norm": ours.normalized[i],
            "B_edelman_norm": edelman.normalized[i],
        }
        for i, (depth, width) in enumerate(keys)
    ]
    logger.info(f"Compared {len(rows)} checkpoints along {axis}")
    return CompareResult(rows=rows, axis=axis, ours=ours, edelman=edelman)


def run_sweep_p(
    source: WeightSource, settings: AnalysisSettings, m: int | None = None
) -> list[dict[str, Any]]:
    """term(p)/term(0) for every matrix over the grid {0, 1/m, ..., 2}."""
    ckpt = source.load_checkpoint()
    m = m or settings.grid_size or default_grid_size(ckpt.depth, ckpt.width)
    measured = measure_checkpoint(ckpt, settings.rank_tol, settings.workers)
    rows = p_sweep_diagnostic(
        ckpt, IndexGrid(m).values, settings.bound.act_lipschitz, measured
    )
    degenerate = sorted({row["name"] for row in rows if row["degenerate"]})
    if degenerate:
        logger.warning(
            f"{len(degenerate)} zero matrices have no p-sweep ratio: "
            f"{', '.join(degenerate)}"
        )
    return rows


def run_spectra(
    source: WeightSource, settings: AnalysisSettings
) -> list[dict[str, Any]]:
    ckpt = source.load_checkpoint()
    measured = measure_checkpoint(ckpt, settings.rank_tol, settings.workers)
    return spectra_dump(ckpt, measured)


def run_norm_scaling(
    sources: Sequence[WeightSource], settings: AnalysisSettings
) -> list[dict[str, Any]]:
    """Mixed-norm rows of every checkpoint, ordered by (L, N)."""
    rows = []
    for source in sources:
        ckpt = source.load_checkpoint()
        measured = measure_checkpoint(ckpt, settings.rank_tol, settings.workers)
        rows.extend(norm_scaling_rows(ckpt, measured))
    return sorted(rows, key=lambda row: (row["L"], row["N"]))


def run_regime_table(
    width: float, depth: float, c: float, r: float, c_f: float
) -> list[dict[str, Any]]:
    """One row per (regime, method) with the symbolic and numeric factor."""
    rows = []
    for regime in REGIMES:
        table = regime_table(regime, width, depth, c, r=r, c_f=c_f)
        for method, value in table["values"].items():
            rows.append(
                {
                    "regime": regime,
                    "method": method,
                    "symbol": table["symbols"][method],
                    "value": value,
                }
            )
    return rows


def load_theory_weights(path: str | Path) -> tuple[TheoryWeights, dict[str, Any]]:
    """Theory weights (``layer.{l}.{qk|v|m}``) from a tensor file."""
    path = Path(path)
    weights = map_theory_layout(read_table(path))
    return weights, {"source": "file", "file": path.name, "sha256": file_digest(path)}


def random_theory_instance(
    depth: int, width: int, radius: float, seed: int = DEFAULT_SEED
) -> tuple[TheoryWeights, dict[str, Any]]:
    weights = random_theory_weights(np.random.default_rng(seed), width, depth, radius)
    return weights, {
        "source": "random",
        "seed": seed,
        "L": depth,
        "N": width,
        "radius": radius,
    }


def _baselines(
    weights: TheoryWeights, radii: LayerRadii, cfg: BoundConfig
) -> dict[str, Any]:
    mixed = mixed_radii_from_weights(weights)
    leading, full = edelman_factor(mixed, radii, cfg)
    record: dict[str, Any] = {"edelman": {"leading": leading, "full": full}}
    c11 = float(np.max(mixed.mixed11))
    try:
        leading, full = trauger_factor(c11, radii, cfg)
        record["trauger"] = {"leading": leading, "full": full, "C11": c11}
    except DomainError as e:
        logger.warning(f"Skipping Trauger baseline: {e}")
        record["trauger"] = None
    return record


def run_posthoc(
    weights: TheoryWeights,
    instance: dict[str, Any],
    settings: AnalysisSettings,
    version: str,
) -> dict[str, Any]:
    """Every bound of the theory model at the grid-selected indices."""
    cfg = settings.bound.model_copy(
        update={"N": weights.hidden_dim, "L": weights.depth}
    )
    m = settings.grid_size or default_grid_size(weights.depth, cfg.N)
    tol, workers = settings.rank_tol, settings.workers
    radii = weights.layer_radii(0.0, rank_tol=tol)
    selection = select_indices(weights, radii, cfg, m, workers, rank_tol=tol)
    indices = np.asarray(selection.indices).reshape(weights.depth, 3)
    selected_radii = weights.layer_radii(indices, rank_tol=tol)
    bounds = {
        "posthoc": posthoc_bound(
            weights, radii, cfg, m, workers=workers, rank_tol=tol
        ),
        "grid": grid_bound(weights, radii, cfg, selection.indices, m, rank_tol=tol),
        "simplified": simplified_bound(weights, radii, cfg, m=m, rank_tol=tol),
        "general_p": gap_bound_general_p(selected_radii, cfg),
    }
    logger.info(
        f"Post hoc bound for L={weights.depth}, N={cfg.N}: "
        f"{bounds['posthoc'].total:.6g} (m={m})"
    )
    return {
        "schema": REPORT_SCHEMA_VERSION,
        "config": {**settings.echo(), "bound": cfg.model_dump(mode="json")},
        "instance": instance,
        "selection": selection.to_dict(),
        "bounds": {name: breakdown.to_dict() for name, breakdown in bounds.items()},
        "baselines": _baselines(weights, radii, cfg),
        "provenance": {"tool_version": version, "rank_tol": settings.rank_tol},
    }


def write_synth(spec: SynthSpec, out: str | Path) -> dict[str, Any]:
    """Write a synthetic checkpoint; returns a summary record."""
    out = Path(out)
    data = write_safetensors(synth_checkpoint(spec))
    try:
        out.write_bytes(data)
    except OSError as e:
        logger.error(f"Failed to write checkpoint {out}: {e}")
        raise
    logger.info(f"Wrote synthetic checkpoint {out} ({len(data)} bytes)")
    return {
        "schema": REPORT_SCHEMA_VERSION,
        "file": out.name,
        "bytes": len(data),
        "sha256": file_digest(out),
        "spec": spec.model_dump(mode="json"),
    }
