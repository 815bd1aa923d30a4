"""
Metrics logging utilities.

Provides CSV logging of per-episode training metrics and the reader used by
plotting and run comparison.
"""

import csv
import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

from .errors import ContractViolation, MetricsParseError

logger = logging.getLogger(__name__)

METRICS_HEADER = ["run_id", "seed", "episode", "return_total", "collisions", "steps", "epsilon"]


@dataclass(frozen=True)
class MetricsRow:
    """
    One training episode.

    Attributes:
        run_id: Name of the run series the episode belongs to
        seed: Seed of the run
        episode: Zero-based episode index, strictly increasing per series
        return_total: Undiscounted return (team return in multi-agent stages)
        collisions: Collision events in the episode
        steps: Ticks the episode lasted
        epsilon: Exploration rate used
    """
    run_id: str
    seed: int
    episode: int
    return_total: float
    collisions: int
    steps: int
    epsilon: float

    def as_csv(self) -> List[str]:
        return [
            self.run_id,
            str(self.seed),
            str(self.episode),
            repr(float(self.return_total)),
            str(self.collisions),
            str(self.steps),
            repr(float(self.epsilon)),
        ]


class MetricsLogger:
    """
    Writes episode rows to a metrics CSV file.

    The header is written when the logger is created; rows are appended in
    the order they are logged. Rows must keep episodes strictly increasing
    within each (run_id, seed) series.
    """

    def __init__(self, csv_file: Union[str, Path]):
        """
        Initialize metrics logger.

        Args:
            csv_file: Destination file, truncated if it exists
        """
        self.csv_file = Path(csv_file)
        self.csv_file.parent.mkdir(parents=True, exist_ok=True)
        self.rows: List[MetricsRow] = []
        self._last_episode: Dict[Tuple[str, int], int] = {}
        self._init_csv()

    def _init_csv(self):
        """Initialize CSV file with headers."""
        with open(self.csv_file, "w", newline="", encoding="utf-8") as f:
            csv.writer(f, lineterminator="\n").writerow(METRICS_HEADER)

    def log(self, row: MetricsRow):
        """
        Append one episode row.

        Raises:
            ContractViolation: If the episode does not follow the previous one
                of the same series
        """
        self.log_rows([row])

    def log_rows(self, rows: Iterable[MetricsRow]):
        rows = list(rows)
        for row in rows:
            key = (row.run_id, row.seed)
            last = self._last_episode.get(key)
            if last is not None and row.episode <= last:
                raise ContractViolation(
                    f"episode {row.episode} of {row.run_id}/seed {row.seed} does not follow episode {last}"
                )
            self._last_episode[key] = row.episode

        with open(self.csv_file, "a", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerows(row.as_csv() for row in rows)
        self.rows.extend(rows)

    def summarize(self, window: int = 50) -> Dict[str, Dict]:
        """Summary statistics of everything logged so far."""
        summary = summarize(self.rows, window)
        for entry in summary.values():
            entry["csv_file"] = str(self.csv_file)
        return summary


def read_metrics(path: Union[str, Path]) -> List[MetricsRow]:
    """
    Parse a metrics CSV file.

    Raises:
        MetricsParseError: Naming the offending line on a missing header, a
            wrong field count, a malformed value or an out-of-order episode
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MetricsParseError(path, 0, f"cannot read metrics: {e}") from e

    records = list(csv.reader(text.splitlines()))
    if not records or records[0] != METRICS_HEADER:
        raise MetricsParseError(path, 1, "expected header " + ",".join(METRICS_HEADER))

    rows: List[MetricsRow] = []
    last_episode: Dict[Tuple[str, int], int] = {}
    for number, record in enumerate(records[1:], start=2):
        if not record:
            continue
        if len(record) != len(METRICS_HEADER):
            raise MetricsParseError(path, number, f"expected {len(METRICS_HEADER)} fields, found {len(record)}")
        row = _parse_row(path, number, record)
        key = (row.run_id, row.seed)
        if key in last_episode and row.episode <= last_episode[key]:
            raise MetricsParseError(path, number, f"episode {row.episode} is not after {last_episode[key]}")
        last_episode[key] = row.episode
        rows.append(row)

    if not rows:
        raise MetricsParseError(path, len(records), "no episode rows")
    logger.debug("Read %d metric rows from %s", len(rows), path)
    return rows


def _parse_row(path: Path, number: int, record: List[str]) -> MetricsRow:
    values = {}
    for column, raw in zip(fields(MetricsRow), record):
        try:
            values[column.name] = column.type(raw) if column.type in (int, float) else raw
        except ValueError:
            raise MetricsParseError(path, number, f"bad {column.name} value {raw!r}") from None
    if not values["run_id"]:
        raise MetricsParseError(path, number, "empty run_id")
    if not math.isfinite(values["return_total"]) or not math.isfinite(values["epsilon"]):
        raise MetricsParseError(path, number, "non-finite value")
    return MetricsRow(**values)


def summarize(rows: Iterable[MetricsRow], window: int = 50) -> Dict[str, Dict]:
    """
    Per run_id summary statistics.

    Returns:
        run_id -> episodes, seeds, mean_return, final_mean_return (mean over
        seeds of the last ``window`` episodes) and total_collisions
    """
    if window < 1:
        raise ContractViolation(f"window must be positive, got {window}")
    series: Dict[str, Dict[int, List[MetricsRow]]] = {}
    for row in rows:
        series.setdefault(row.run_id, {}).setdefault(row.seed, []).append(row)

    summary = {}
    for run_id in sorted(series):
        by_seed = series[run_id]
        all_rows = [row for seed in sorted(by_seed) for row in by_seed[seed]]
        finals = [
            math.fsum(r.return_total for r in by_seed[seed][-window:]) / len(by_seed[seed][-window:])
            for seed in sorted(by_seed)
        ]
        summary[run_id] = {
            "episodes": max(len(v) for v in by_seed.values()),
            "seeds": sorted(by_seed),
            "mean_return": round(math.fsum(r.return_total for r in all_rows) / len(all_rows), 6),
            "final_mean_return": round(math.fsum(finals) / len(finals), 6),
            "total_collisions": sum(r.collisions for r in all_rows),
        }
    return summary
