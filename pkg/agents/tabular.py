"""
Tabular Q-learning and Q-table merging.

Q-tables map canonical state keys to five action values. Tables trained on
separate sub-tasks are merged into one joint table that initialises learning
on the composite task.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from envs.gridworld import N_ACTIONS
from utils.errors import ContractViolation, QTableLoadError

QTABLE_MAGIC = "SRLQT 1"


@dataclass
class QTableMetadata:
    """Bookkeeping carried alongside a table (not part of the file format)."""
    variant: Optional[str] = None
    episodes: int = 0


class QTable:
    """
    Map from state key to a vector of action values.

    Unvisited states read as zero vectors; they are only stored once written.
    """

    def __init__(self, entries: Optional[Dict[str, np.ndarray]] = None, metadata: Optional[QTableMetadata] = None):
        self.entries: Dict[str, np.ndarray] = {}
        self.metadata = metadata or QTableMetadata()
        for key, values in (entries or {}).items():
            self.entries[key] = _checked_vector(key, values)

    def values(self, key: str) -> np.ndarray:
        """Action values of a state (a zero vector if never visited)."""
        stored = self.entries.get(key)
        return np.zeros(N_ACTIONS) if stored is None else stored.copy()

    def row(self, key: str) -> np.ndarray:
        """Writable action-value row, created on first access."""
        if key not in self.entries:
            self.entries[key] = np.zeros(N_ACTIONS)
        return self.entries[key]

    def greedy(self, key: str) -> int:
        """Argmax action, lowest index on ties."""
        return int(np.argmax(self.values(key)))

    def copy(self) -> "QTable":
        return QTable(
            {k: v.copy() for k, v in self.entries.items()},
            QTableMetadata(self.metadata.variant, self.metadata.episodes),
        )

    def keys(self) -> List[str]:
        return sorted(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        if self.entries.keys() != other.entries.keys():
            return False
        return all(np.array_equal(v, other.entries[k]) for k, v in self.entries.items())

    def __repr__(self) -> str:
        return f"QTable(states={len(self)}, variant={self.metadata.variant!r})"


@dataclass(frozen=True)
class LearningParams:
    """
    Tabular learning hyperparameters.

    Attributes:
        alpha: Learning rate in [0, 1]
        gamma: Discount factor in [0, 1)
        epsilon_start: Exploration rate of the first episode
        epsilon_end: Exploration rate after the decay
        epsilon_decay_episodes: Episodes over which epsilon decays linearly
    """
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractViolation(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ContractViolation(f"gamma must lie in [0, 1), got {self.gamma}")
        for name in ("epsilon_start", "epsilon_end"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractViolation(f"{name} must lie in [0, 1], got {value}")
        if self.epsilon_end > self.epsilon_start:
            raise ContractViolation("epsilon_end must not exceed epsilon_start")
        if self.epsilon_decay_episodes < 1:
            raise ContractViolation("epsilon_decay_episodes must be positive")

    def epsilon_at(self, episode: int) -> float:
        """Linearly decayed exploration rate for a zero-based episode index."""
        return linear_epsilon(self.epsilon_start, self.epsilon_end, self.epsilon_decay_episodes, episode)


def linear_epsilon(start: float, end: float, decay_episodes: int, episode: int) -> float:
    """Exploration rate moving linearly from start to end, then held at end."""
    progress = min(episode / decay_episodes, 1.0)
    return start + (end - start) * progress


def q_update(
    table: QTable,
    s: str,
    a: int,
    r: float,
    s_next: str,
    done: bool,
    params: LearningParams,
) -> QTable:
    """
    One Q-learning backup, in place.

    Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a')), with the
    bootstrap term dropped on terminal transitions.

    Returns:
        The same table, for chaining

    Raises:
        ContractViolation: If the reward is not finite
    """
    if not math.isfinite(r):
        raise ContractViolation(f"reward must be finite, got {r}")
    if params.alpha == 0.0:
        return table

    bootstrap = 0.0 if done else float(np.max(table.values(s_next)))
    row = table.row(s)
    row[a] = (1.0 - params.alpha) * row[a] + params.alpha * (r + params.gamma * bootstrap)
    return table


def select_action(table: QTable, s: str, epsilon: float, rng: np.random.Generator) -> int:
    """
    Epsilon-greedy action choice.

    Always draws one uniform number first so the generator stream does not
    depend on epsilon.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ContractViolation(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return table.greedy(s)


def merge_tables(tables: Sequence[QTable]) -> QTable:
    """
    Combine sub-task tables into a joint table.

    Keys held by one table are copied; keys held by several tables get the
    element-wise mean of their vectors. Sums use math.fsum, which is exactly
    rounded, so the result does not depend on the input order.

    Raises:
        ContractViolation: If no tables are given
    """
    if not tables:
        raise ContractViolation("merge_tables needs at least one table")

    gathered: Dict[str, List[np.ndarray]] = {}
    for table in tables:
        for key, values in table.entries.items():
            gathered.setdefault(key, []).append(values)

    merged: Dict[str, np.ndarray] = {}
    for key in sorted(gathered):
        vectors = gathered[key]
        if len(vectors) == 1:
            merged[key] = vectors[0].copy()
        else:
            merged[key] = np.array([
                math.fsum(v[a] for v in vectors) / len(vectors)
                for a in range(N_ACTIONS)
            ])

    variants = sorted({t.metadata.variant for t in tables if t.metadata.variant})
    metadata = QTableMetadata(
        variant="+".join(variants) or None,
        episodes=sum(t.metadata.episodes for t in tables),
    )
    return QTable(merged, metadata)


def save_qtable(table: QTable, path: Union[str, Path]) -> Path:
    """
    Write a table in the canonical text format.

    Line 1 ``SRLQT 1``, line 2 ``actions 5``, then one sorted line per state:
    the key followed by five round-trip decimals.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [QTABLE_MAGIC, f"actions {N_ACTIONS}"]
    for key in table.keys():
        values = " ".join(repr(float(v)) for v in table.entries[key])
        lines.append(f"{key} {values}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_qtable(path: Union[str, Path], variant: Optional[str] = None) -> QTable:
    """
    Read a table written by save_qtable.

    Raises:
        QTableLoadError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise QTableLoadError(f"cannot read Q-table {path}: {e}") from e

    if len(lines) < 2 or lines[0] != QTABLE_MAGIC:
        raise QTableLoadError(f"{path}:1: expected header {QTABLE_MAGIC!r}")
    if lines[1] != f"actions {N_ACTIONS}":
        raise QTableLoadError(f"{path}:2: expected 'actions {N_ACTIONS}', got {lines[1]!r}")

    entries: Dict[str, np.ndarray] = {}
    for number, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) != N_ACTIONS + 1:
            raise QTableLoadError(f"{path}:{number}: expected a key and {N_ACTIONS} values")
        key = parts[0]
        if key in entries:
            raise QTableLoadError(f"{path}:{number}: duplicate state {key!r}")
        try:
            entries[key] = _checked_vector(key, [float(v) for v in parts[1:]])
        except (ValueError, ContractViolation) as e:
            raise QTableLoadError(f"{path}:{number}: {e}") from e

    return QTable(entries, QTableMetadata(variant=variant or path.stem))


def _checked_vector(key: str, values: Iterable[float]) -> np.ndarray:
    vec = np.array(list(values), dtype=np.float64)
    if vec.shape != (N_ACTIONS,):
        raise ContractViolation(f"state {key!r} has {vec.size} values, expected {N_ACTIONS}")
    if not np.all(np.isfinite(vec)):
        raise ContractViolation(f"state {key!r} has non-finite values")
    return vec
