"""
SVG line charts of scaling curves.

The SVG viewBox is a fixed 800 x 600. The SVG hash salt and the date
metadata are pinned so identical data gives identical bytes.
"""

import logging
from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

from ..core.errors import InputError  # noqa: E402
from ..utils.constants import PACKAGE_LOGGER_NAME  # noqa: E402

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.reports.chart")

# The SVG backend measures in points, 72 per inch
VIEWBOX = (800, 600)
FIGSIZE = (VIEWBOX[0] / 72, VIEWBOX[1] / 72)
SVG_RC = {"svg.hashsalt": "schatten-bounds", "svg.fonttype": "none"}
MARKERS = ("o", "s", "^", "D", "v", "P")


def plot_curves(
    series: Mapping[str, Sequence[tuple[float, float]]],
    path: str | Path,
    x_label: str,
    y_label: str,
    title: str = "",
    log_y: bool = False,
) -> Path:
    """Draw one line per series and save it as SVG.

    Args:
        series: Label -> points ``(x, y)``; points are drawn in x order.
        path: Output file.
        x_label: Axis label, e.g. ``L`` or ``N``.
        y_label: Axis label.
        title: Optional chart title.
        log_y: Use a logarithmic y axis.

    Returns:
        The written path.
    """
    if not series:
        raise InputError("plot_curves needs at least one series")
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=FIGSIZE)
        ax = fig.add_subplot()
        for i, (label, points) in enumerate(series.items()):
            ordered = sorted(points)
            ax.plot(
                [x for x, _ in ordered],
                [y for _, y in ordered],
                marker=MARKERS[i % len(MARKERS)],
                label=label,
            )
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            logger.error(f"Failed to write chart {path}: {e}")
            raise
    logger.info(f"Wrote chart {path} with {len(series)} series")
    return path
