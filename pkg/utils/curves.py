"""
Learning-curve arithmetic: smoothing, threshold crossing and run comparison.
"""

import math
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import ContractViolation
from .metrics import MetricsRow


def moving_average(series: Sequence[float], window: int = 5) -> List[float]:
    """
    Trailing moving average with leading partial windows.

    Element i is the mean of the last min(i + 1, window) values, so the
    output has the input's length.

    Raises:
        ContractViolation: If window < 1
    """
    if window < 1:
        raise ContractViolation(f"window must be at least 1, got {window}")
    values = [float(v) for v in series]
    if window == 1:
        return values
    out = []
    for i in range(len(values)):
        chunk = values[max(0, i + 1 - window):i + 1]
        out.append(math.fsum(chunk) / len(chunk))
    return out


def episodes_to_threshold(series: Sequence[float], threshold: float, window: int = 50) -> Optional[int]:
    """
    First episode index whose trailing window mean reaches the threshold.

    Only full windows count, so the earliest possible answer is window - 1.

    Returns:
        The index, or None if the threshold is never reached
    """
    if window < 1:
        raise ContractViolation(f"window must be at least 1, got {window}")
    values = [float(v) for v in series]
    for i in range(window - 1, len(values)):
        if math.fsum(values[i + 1 - window:i + 1]) / window >= threshold:
            return i
    return None


def group_series(rows: Iterable[MetricsRow]) -> Dict[str, Dict[int, List[MetricsRow]]]:
    """run_id -> seed -> rows in episode order."""
    grouped: Dict[str, Dict[int, List[MetricsRow]]] = {}
    for row in rows:
        grouped.setdefault(row.run_id, {}).setdefault(row.seed, []).append(row)
    for by_seed in grouped.values():
        for seed_rows in by_seed.values():
            seed_rows.sort(key=lambda r: r.episode)
    return grouped


def compare_runs(rows: Iterable[MetricsRow], threshold: float, window: int = 50) -> Dict[str, Dict]:
    """
    Median episodes-to-threshold over seeds, per run_id.

    Seeds that never reach the threshold count as infinitely slow, so the
    median is None when more than half of them miss it.

    Returns:
        run_id -> {"median": Optional[float], "per_seed": {seed: Optional[int]},
        "reached": number of seeds reaching the threshold}
    """
    result = {}
    for run_id, by_seed in sorted(group_series(rows).items()):
        per_seed = {
            seed: episodes_to_threshold([r.return_total for r in by_seed[seed]], threshold, window)
            for seed in sorted(by_seed)
        }
        hits = [math.inf if v is None else float(v) for v in per_seed.values()]
        median = float(np.median(hits))
        result[run_id] = {
            "median": None if math.isinf(median) else median,
            "per_seed": per_seed,
            "reached": sum(v is not None for v in per_seed.values()),
        }
    return result


def collisions_in_fraction(rows: Iterable[MetricsRow], fraction: float = 0.25) -> Dict[str, float]:
    """
    Median over seeds of the collisions summed over the first part of training.

    Args:
        rows: Metrics rows of one or more runs
        fraction: Leading share of each seed's episodes, in (0, 1]

    Returns:
        run_id -> median cumulative collisions
    """
    if not 0.0 < fraction <= 1.0:
        raise ContractViolation(f"fraction must lie in (0, 1], got {fraction}")
    result = {}
    for run_id, by_seed in sorted(group_series(rows).items()):
        totals = []
        for seed in sorted(by_seed):
            seed_rows = by_seed[seed]
            count = max(1, int(math.ceil(fraction * len(seed_rows))))
            totals.append(sum(r.collisions for r in seed_rows[:count]))
        result[run_id] = float(np.median(totals))
    return result
