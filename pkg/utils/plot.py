"""
Learning-curve plots.

One curve per run_id: the mean over seeds of the smoothed episode returns,
with a min-max band over seeds when a run has several seeds.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .curves import group_series, moving_average
from .errors import ContractViolation
from .metrics import MetricsRow, read_metrics

logger = logging.getLogger(__name__)

VIEWBOX_WIDTH = 800
VIEWBOX_HEIGHT = 500
POINTS_PER_INCH = 72

# Fixed salt and text-as-text keep the SVG bytes a pure function of the data.
SVG_RC = {
    "svg.hashsalt": "staged-rl",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def curve_bands(rows: Sequence[MetricsRow], window: int) -> Dict[str, Dict[str, np.ndarray]]:
    """
    Smoothed mean/min/max return curves per run_id.

    Seeds are cut to the shortest seed's episode count so every point
    averages the same number of seeds.
    """
    bands = {}
    for run_id, by_seed in sorted(group_series(rows).items()):
        length = min(len(seed_rows) for seed_rows in by_seed.values())
        smoothed = np.array([
            moving_average([r.return_total for r in by_seed[seed][:length]], window)
            for seed in sorted(by_seed)
        ])
        bands[run_id] = {
            "episodes": np.array([r.episode for r in by_seed[min(by_seed)][:length]]),
            "mean": smoothed.mean(axis=0),
            "low": smoothed.min(axis=0),
            "high": smoothed.max(axis=0),
            "seeds": np.array(sorted(by_seed)),
        }
    return bands


def emit_plot(
    metrics_files: Sequence[Union[str, Path]],
    window: int,
    output: Union[str, Path],
    title: str = "Episode return",
) -> Path:
    """
    Write an SVG learning-curve plot for one or more metrics files.

    Args:
        metrics_files: CSV files written by MetricsLogger
        window: Moving-average window applied per seed before averaging
        output: Destination SVG path
        title: Axes title

    Returns:
        The output path

    Raises:
        MetricsParseError: If an input file is malformed
        ContractViolation: If no files are given or the window is invalid
    """
    if not metrics_files:
        raise ContractViolation("emit_plot needs at least one metrics file")
    rows: List[MetricsRow] = []
    for path in metrics_files:
        rows.extend(read_metrics(path))
    bands = curve_bands(rows, window)

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(VIEWBOX_WIDTH / POINTS_PER_INCH, VIEWBOX_HEIGHT / POINTS_PER_INCH), dpi=POINTS_PER_INCH)
        ax = fig.add_subplot(1, 1, 1)
        for run_id, band in bands.items():
            line, = ax.plot(band["episodes"], band["mean"], label=run_id, linewidth=1.5)
            if len(band["seeds"]) > 1:
                ax.fill_between(band["episodes"], band["low"], band["high"], color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_title(title)
        ax.set_xlabel("episode")
        ax.set_ylabel(f"return (moving average, window {window})")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(output, format="svg", metadata={"Date": None})

    logger.info("Wrote plot of %d run(s) to %s", len(bands), output)
    return output
