"""
Report records and their JSON / CSV emission.

Reports are deterministic: no timestamps, JSON keys sorted, CSV rows in
(layer, kind, head) order. Totals are stored next to the per-matrix
records they are summed from, and ``AnalysisReport.check_totals`` recomputes
them.
"""

import csv
import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

import numpy as np

from ..analysis.bertproxy import CheckpointAnalysis
from ..analysis.posthoc import penalty_omega
from ..analysis.spectral import spectrum_summary
from ..core.errors import InputError, SchattenBoundsError
from ..utils.constants import PACKAGE_LOGGER_NAME, REPORT_SCHEMA_VERSION

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.reports.records")

COMPARE_COLUMNS = (
    "L",
    "N",
    "B_ours_raw",
    "B_edelman_raw",
    "B_ours_norm",
    "B_edelman_norm",
)
SWEEP_COLUMNS = ("name", "layer", "kind", "head", "p", "ratio", "degenerate")
SPECTRA_COLUMNS = ("name", "layer", "kind", "head", "index", "sigma")
NORM_SCALING_COLUMNS = (
    "L",
    "N",
    "name",
    "layer",
    "kind",
    "head",
    "mixed21",
    "mixed11",
    "frobenius",
    "spectral",
    "rank",
)
REGIME_COLUMNS = ("regime", "method", "symbol", "value")


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(record: Mapping[str, Any]) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(record, indent=2, sort_keys=True, default=_to_builtin) + "\n"


def error_record(error: BaseException) -> dict[str, Any]:
    """Machine-readable error record written by the CLI before exiting."""
    if isinstance(error, SchattenBoundsError):
        detail = error.to_record()
    elif isinstance(error, OSError):
        detail = {"kind": "input", "reason": "io", "message": str(error)}
    else:
        detail = {"kind": "error", "reason": None, "message": str(error)}
    return {"schema": REPORT_SCHEMA_VERSION, "error": detail}


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_csv(
    rows: Sequence[Mapping[str, Any]], columns: Sequence[str], out: IO[str]
) -> None:
    """Write rows with a header line; missing values become empty cells."""
    writer = csv.DictWriter(
        out, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore"
    )
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(row.get(key)) for key in columns})


def write_text(text: str, out: str | Path | None, stream: IO[str]) -> None:
    """Write to ``out`` when given, else to ``stream``."""
    if out is None:
        stream.write(text)
        return
    path = Path(out)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to write report {path}: {e}")
        raise
    logger.info(f"Wrote {path}")


@dataclass
class AnalysisReport:
    """One analysed checkpoint: config echo, per-matrix records, totals, provenance.

    ``totals["complexity"]`` is the ordered sum of the record terms and
    ``totals["B_ours"]`` adds sqrt(L) to it.
    """

    config: dict[str, Any]
    checkpoint: dict[str, Any]
    matrices: list[dict[str, Any]]
    totals: dict[str, Any]
    provenance: dict[str, Any]
    rank_cap_violations: list[str] = field(default_factory=list)
    schema: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": self.schema,
            "config": self.config,
            "checkpoint": self.checkpoint,
            "matrices": self.matrices,
            "totals": self.totals,
            "provenance": self.provenance,
            "rank_cap_violations": self.rank_cap_violations,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def recompute_totals(self) -> dict[str, float]:
        """Totals rebuilt from the per-matrix records alone."""
        complexity = sum(record["term"] for record in self.matrices)
        depth = self.checkpoint["L"]
        return {
            "complexity": complexity,
            "B_ours": complexity + math.sqrt(depth),
            "omega": penalty_omega(
                [record["schatten_power"] for record in self.matrices],
                self.totals["m"],
            ),
        }

    def check_totals(self) -> None:
        """Raise ``InputError`` when stored totals differ from the records."""
        for key, value in self.recompute_totals().items():
            if self.totals[key] != value:
                raise InputError(
                    f"Report total {key}={self.totals[key]!r} does not match "
                    f"the per-matrix records ({value!r})"
                )


def build_analysis_report(
    analysis: CheckpointAnalysis,
    config: Mapping[str, Any],
    provenance: Mapping[str, Any],
) -> AnalysisReport:
    """Assemble the report for one analysed checkpoint."""
    ckpt = analysis.checkpoint
    selection = analysis.b_ours.report
    matrices = []
    for measured, chosen in zip(analysis.measured, selection.records, strict=True):
        if measured.name != chosen["name"]:
            raise InputError(
                f"Record order mismatch: {measured.name} vs {chosen['name']}"
            )
        matrices.append(
            {
                "name": measured.name,
                "layer": measured.layer,
                "kind": measured.kind,
                "head": measured.head,
                "shape": [measured.spectrum.rows, measured.spectrum.cols],
                "sigma": spectrum_summary(measured.spectrum),
                "norms": {
                    "spectral": measured.spectral,
                    "frobenius": measured.frobenius,
                    "mixed21": measured.mixed21,
                    "mixed11": measured.mixed11,
                },
                "p": chosen["p"],
                "schatten_power": chosen["schatten_power"],
                "term": chosen["term"],
            }
        )
    report = AnalysisReport(
        config=dict(config),
        checkpoint={
            "name": ckpt.name,
            "L": ckpt.depth,
            "N": ckpt.width,
            "heads": ckpt.heads,
            "head_dim": ckpt.head_dim,
            "intermediate": ckpt.intermediate,
        },
        matrices=matrices,
        totals={
            "B_ours": analysis.b_ours.value,
            "B_edelman": analysis.b_edelman,
            "complexity": selection.total,
            "sqrt_depth": math.sqrt(ckpt.depth),
            "omega": selection.omega,
            "chi": selection.chi,
            "m": selection.m,
        },
        provenance=dict(provenance),
        rank_cap_violations=list(analysis.rank_cap_violations),
    )
    report.check_totals()
    return report
