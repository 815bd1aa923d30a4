"""
Utility functions for the staged RL workbench.

Plotting lives in ``utils.plot`` and is imported on demand.
"""

from .curves import collisions_in_fraction, compare_runs, episodes_to_threshold, moving_average
from .errors import (
    ConfigurationError,
    ContractViolation,
    MetricsParseError,
    QTableLoadError,
    WeightsLoadError,
    WorkbenchError,
)
from .metrics import MetricsLogger, MetricsRow, read_metrics, summarize

__all__ = [
    "collisions_in_fraction",
    "compare_runs",
    "episodes_to_threshold",
    "moving_average",
    "ConfigurationError",
    "ContractViolation",
    "MetricsParseError",
    "QTableLoadError",
    "WeightsLoadError",
    "WorkbenchError",
    "MetricsLogger",
    "MetricsRow",
    "read_metrics",
    "summarize",
]
