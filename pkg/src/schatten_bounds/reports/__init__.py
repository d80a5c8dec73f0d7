"""
Report emission: JSON/CSV records and SVG charts.
"""

from .chart import plot_curves
from .records import (
    COMPARE_COLUMNS,
    NORM_SCALING_COLUMNS,
    REGIME_COLUMNS,
    SPECTRA_COLUMNS,
    SWEEP_COLUMNS,
    AnalysisReport,
    build_analysis_report,
    dumps,
    error_record,
    write_csv,
    write_text,
)

__all__ = [
    # Records
    "AnalysisReport",
    "build_analysis_report",
    "dumps",
    "error_record",
    "write_csv",
    "write_text",
    # CSV layouts
    "COMPARE_COLUMNS",
    "NORM_SCALING_COLUMNS",
    "REGIME_COLUMNS",
    "SPECTRA_COLUMNS",
    "SWEEP_COLUMNS",
    # Charts
    "plot_curves",
]
