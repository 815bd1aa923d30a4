"""
Junction gridworld substrate.

Builds the cross-shaped traffic junction map shared by the single-agent and
multi-agent environments, applies grid moves, and encodes the 3x3 partial
view each agent receives.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import FrozenSet, Iterable, Mapping, NamedTuple, Optional, Tuple

from utils.errors import ConfigurationError, ContractViolation


class Position(NamedTuple):
    """A grid cell, addressed by row then column."""
    row: int
    col: int


class Action(IntEnum):
    """Grid moves. Indices are part of every file format, never reorder."""
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


N_ACTIONS = len(Action)

_DELTAS = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.STAY: (0, 0),
}


class CellCode(IntEnum):
    """Fixed alphabet of the observation mask."""
    OFF_ROAD = 0
    EMPTY_ROAD = 1
    OTHER_VEHICLE = 2
    GOAL = 3


N_CELL_CODES = len(CellCode)

Mask = Tuple[Tuple[int, int, int], Tuple[int, int, int], Tuple[int, int, int]]


@dataclass(frozen=True)
class GridLayout:
    """
    Cross-shaped junction map.

    Attributes:
        height: Number of rows
        width: Number of columns
        road_cells: Every drivable cell
        spawn_points: Road cells on the outer border, ordered north, south, west, east
        goal_candidates: Cells a goal or destination may occupy
        band_start: First row/column index of the crossing road band
        band_width: Width of each road arm in cells
    """
    height: int
    width: int
    road_cells: FrozenSet[Position]
    spawn_points: Tuple[Position, ...]
    goal_candidates: Tuple[Position, ...]
    band_start: int
    band_width: int

    @property
    def center(self) -> Position:
        """Top-left cell of the central crossing block."""
        return Position(self.band_start, self.band_start)

    def arm_of(self, pos: Position) -> str:
        """
        Name the arm a road cell belongs to.

        Args:
            pos: A road cell

        Returns:
            "north", "south", "west", "east", or "center" for the crossing block
        """
        band_end = self.band_start + self.band_width - 1
        if pos.row < self.band_start:
            return "north"
        if pos.row > band_end:
            return "south"
        if pos.col < self.band_start:
            return "west"
        if pos.col > band_end:
            return "east"
        return "center"


@dataclass(frozen=True)
class LocalObservation:
    """
    What one agent perceives at one tick.

    Attributes:
        own_position: The agent's cell
        mask: 3x3 cell codes centred on own_position, row-major
        step_fraction: step / max_steps, multi-agent mode only
        target: The agent's assigned goal or destination, if it has one
    """
    own_position: Position
    mask: Mask
    step_fraction: Optional[float] = None
    target: Optional[Position] = None


def build_junction_layout(arm_length: int, arm_width: int) -> GridLayout:
    """
    Build a cross-shaped junction.

    Horizontal and vertical road bands of ``arm_width`` cells cross at the
    centre of a square grid of side ``2 * arm_length + arm_width``.

    Args:
        arm_length: Cells from the grid border to the crossing block (>= 2)
        arm_width: Lanes per arm, 1 or 2

    Returns:
        GridLayout whose spawn points are the road cells on the outer border

    Raises:
        ConfigurationError: If the dimensions are out of range
    """
    if not isinstance(arm_length, int) or arm_length < 2:
        raise ConfigurationError(f"arm_length must be an integer >= 2, got {arm_length!r}")
    if arm_width not in (1, 2):
        raise ConfigurationError(f"arm_width must be 1 or 2, got {arm_width!r}")

    size = 2 * arm_length + arm_width
    band = range(arm_length, arm_length + arm_width)
    road = frozenset(
        Position(r, c)
        for r in range(size)
        for c in range(size)
        if r in band or c in band
    )

    last = size - 1
    spawn = (
        [Position(0, c) for c in band]
        + [Position(last, c) for c in band]
        + [Position(r, 0) for r in band]
        + [Position(r, last) for r in band]
    )

    return GridLayout(
        height=size,
        width=size,
        road_cells=road,
        spawn_points=tuple(spawn),
        goal_candidates=tuple(spawn),
        band_start=arm_length,
        band_width=arm_width,
    )


def apply_action(pos: Position, act: Action, layout: GridLayout) -> Position:
    """
    Move one cell in the action's direction; blocked moves leave pos unchanged.

    Raises:
        ContractViolation: If pos is not a road cell
    """
    if pos not in layout.road_cells:
        raise ContractViolation(f"position {tuple(pos)} is not on the road")
    dr, dc = _DELTAS[Action(act)]
    moved = Position(pos.row + dr, pos.col + dc)
    return moved if moved in layout.road_cells else pos


def observe(
    layout: GridLayout,
    occupied: Mapping[Position, int],
    focus: Position,
    step_fraction: Optional[float] = None,
    goals: Iterable[Position] = (),
    target: Optional[Position] = None,
) -> LocalObservation:
    """
    Encode the 3x3 neighbourhood of ``focus``.

    Off-grid and off-road cells are OFF_ROAD, road cells EMPTY_ROAD, cells in
    ``goals`` GOAL; ``occupied`` codes override both.

    Args:
        layout: Junction layout
        occupied: Cell codes of occupied positions (other vehicles)
        focus: Observing agent's cell
        step_fraction: Normalized step counter, multi-agent mode only
        goals: Goal cells drawn in the base map
        target: The observing agent's assigned destination

    Returns:
        LocalObservation centred on focus
    """
    goal_set = set(goals)
    rows = []
    for dr in (-1, 0, 1):
        row = []
        for dc in (-1, 0, 1):
            cell = Position(focus.row + dr, focus.col + dc)
            if cell in occupied:
                code = int(occupied[cell])
            elif cell in goal_set:
                code = int(CellCode.GOAL)
            elif cell in layout.road_cells:
                code = int(CellCode.EMPTY_ROAD)
            else:
                code = int(CellCode.OFF_ROAD)
            row.append(code)
        rows.append(tuple(row))
    return LocalObservation(
        own_position=focus,
        mask=tuple(rows),
        step_fraction=step_fraction,
        target=target,
    )


def state_key(obs: LocalObservation) -> str:
    """
    Canonical discrete state for the tabular learners.

    Format ``<row>.<col>:<9 mask digits>:<target row>.<target col>`` with ``-``
    for a missing target. The step counter is not part of the key.
    Keys never contain whitespace, so they can lead a Q-table file line.
    """
    pos = f"{obs.own_position.row}.{obs.own_position.col}"
    mask = "".join(str(code) for row in obs.mask for code in row)
    target = "-" if obs.target is None else f"{obs.target.row}.{obs.target.col}"
    return f"{pos}:{mask}:{target}"


def manhattan(a: Position, b: Position) -> int:
    return abs(a.row - b.row) + abs(a.col - b.col)
