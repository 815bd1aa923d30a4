"""
Multi-agent traffic junction.

N vehicles enter through arm ends and must reach a destination at another arm
end. All active vehicles move simultaneously; collisions are penalized and
undone, every active vehicle pays a small per-step penalty, and arrived
vehicles leave the grid.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from utils.errors import ConfigurationError, ContractViolation
from .base import BaseJunctionEnv
from .gridworld import (
    N_CELL_CODES,
    Action,
    CellCode,
    GridLayout,
    LocalObservation,
    Position,
    apply_action,
    build_junction_layout,
    observe,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiEnvConfig:
    """
    Multi-agent junction settings.

    Attributes:
        n_agents: Number of vehicles in an episode
        layout: Junction map, 14x14 two-lane by default
        max_steps: Episode truncation length
        collision_penalty: Reward for every vehicle involved in a collision
        step_penalty: Reward for every active vehicle on every tick
        seed: Seed of the episode generator
    """
    n_agents: int = 4
    layout: GridLayout = build_junction_layout(6, 2)
    max_steps: int = 60
    collision_penalty: float = -10.0
    step_penalty: float = -0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 1:
            raise ConfigurationError(f"n_agents must be positive, got {self.n_agents}")
        if self.n_agents > self.capacity:
            raise ConfigurationError(
                f"n_agents={self.n_agents} exceeds junction capacity {self.capacity} "
                f"({len(self.layout.spawn_points)} spawn points x {self.layout.band_width} lanes)"
            )
        if not self.collision_penalty < self.step_penalty < 0:
            raise ConfigurationError(
                f"need collision_penalty < step_penalty < 0, got {self.collision_penalty} and {self.step_penalty}"
            )
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be positive, got {self.max_steps}")

    @property
    def capacity(self) -> int:
        return len(self.layout.spawn_points) * self.layout.band_width


@dataclass(frozen=True)
class AgentSlot:
    """
    One vehicle.

    ``pos`` is None while the vehicle waits to enter and after it arrived.
    """
    pos: Optional[Position]
    dest: Optional[Position]
    arrived: bool = False

    @property
    def active(self) -> bool:
        return self.pos is not None and not self.arrived

    @property
    def waiting(self) -> bool:
        return self.pos is None and not self.arrived


@dataclass(frozen=True)
class MultiEnvState:
    """
    Episode state.

    Attributes:
        agents: Per-vehicle slots, index = agent id
        step: Ticks taken so far
        done: Whether the episode has ended
        collisions: Vehicles penalized for a collision on the last tick
        rng: Generator used for staggered entry and destination draws
    """
    agents: Tuple[AgentSlot, ...]
    step: int = 0
    done: bool = False
    collisions: int = 0
    rng: np.random.Generator = field(default=None, compare=False, repr=False)

    @property
    def active(self) -> List[bool]:
        return [slot.active for slot in self.agents]


class MultiJunctionEnv(BaseJunctionEnv):
    """Multi-agent junction with simultaneous moves and staggered entry."""

    def __init__(self, config: MultiEnvConfig):
        super().__init__(config.seed)
        self.config = config
        self.layout = config.layout
        self.max_steps = config.max_steps
        self.n_agents = config.n_agents

    def reset(self) -> Tuple[MultiEnvState, List[Optional[LocalObservation]]]:
        """
        Draw a new episode.

        Up to one vehicle per spawn point enters at step 0 (sampled without
        replacement); the rest queue and enter later on freed spawn points.
        Each entering vehicle gets a destination on a different arm.
        """
        rng = np.random.default_rng(self._rng.integers(2**63))
        spawns = self.layout.spawn_points
        first_wave = min(self.n_agents, len(spawns))
        order = rng.permutation(len(spawns))[:first_wave]

        slots = []
        for i in range(self.n_agents):
            if i < first_wave:
                pos = spawns[int(order[i])]
                slots.append(AgentSlot(pos=pos, dest=self._draw_destination(pos, rng)))
            else:
                slots.append(AgentSlot(pos=None, dest=None))

        if first_wave < self.n_agents:
            logger.debug("%d vehicles queued for staggered entry", self.n_agents - first_wave)

        state = MultiEnvState(agents=tuple(slots), rng=rng)
        return state, self.observations(state)

    def step(
        self, state: MultiEnvState, actions: Sequence[Action]
    ) -> Tuple[MultiEnvState, List[Optional[LocalObservation]], List[float], List[bool]]:
        """
        Move every active vehicle at once and score the tick.

        Colliding vehicles (same cell or swap) are reverted to their previous
        cells and receive collision_penalty; resolution repeats until no
        conflicts remain. Every active vehicle also receives step_penalty.
        A vehicle on its destination is marked arrived and removed; waiting
        vehicles then enter on free spawn points.

        Raises:
            ContractViolation: On a wrong action count or a finished episode
        """
        if len(actions) != self.n_agents:
            raise ContractViolation(f"expected {self.n_agents} actions, got {len(actions)}")
        if state.done:
            raise ContractViolation("cannot step a finished episode; call reset()")

        active = [i for i, slot in enumerate(state.agents) if slot.active]
        prev = [state.agents[i].pos for i in active]
        nxt = [apply_action(state.agents[i].pos, actions[i], self.layout) for i in active]

        colliders: Set[int] = set()
        while True:
            hit = detect_collisions(prev, nxt)
            if not hit - colliders:
                break
            colliders |= hit
            for k in hit:
                nxt[k] = prev[k]

        rewards = [0.0] * self.n_agents
        slots = list(state.agents)
        for k, i in enumerate(active):
            reward = self.config.step_penalty
            if k in colliders:
                reward += self.config.collision_penalty
            rewards[i] = reward
            dest = slots[i].dest
            if nxt[k] == dest:
                slots[i] = AgentSlot(pos=None, dest=dest, arrived=True)
            else:
                slots[i] = AgentSlot(pos=nxt[k], dest=dest)

        self._admit_waiting(slots, state.rng)

        step = state.step + 1
        done = all(slot.arrived for slot in slots) or step >= self.max_steps
        next_state = MultiEnvState(
            agents=tuple(slots),
            step=step,
            done=done,
            collisions=len(colliders),
            rng=state.rng,
        )
        return next_state, self.observations(next_state), rewards, [done] * self.n_agents

    def observations(self, state: MultiEnvState) -> List[Optional[LocalObservation]]:
        """Per-vehicle observations; None for vehicles not on the grid."""
        on_grid: Dict[int, Position] = {i: s.pos for i, s in enumerate(state.agents) if s.active}
        fraction = state.step / self.max_steps
        obs: List[Optional[LocalObservation]] = []
        for i, slot in enumerate(state.agents):
            if not slot.active:
                obs.append(None)
                continue
            others = {p: int(CellCode.OTHER_VEHICLE) for j, p in on_grid.items() if j != i}
            obs.append(observe(
                self.layout,
                others,
                slot.pos,
                step_fraction=fraction,
                goals=(slot.dest,),
                target=slot.dest,
            ))
        return obs

    def _draw_destination(self, spawn: Position, rng: np.random.Generator) -> Position:
        arm = self.layout.arm_of(spawn)
        options = [p for p in self.layout.goal_candidates if self.layout.arm_of(p) != arm]
        return options[int(rng.integers(len(options)))]

    def _admit_waiting(self, slots: List[AgentSlot], rng: np.random.Generator) -> None:
        taken = {s.pos for s in slots if s.active}
        free = [p for p in self.layout.spawn_points if p not in taken]
        for i, slot in enumerate(slots):
            if not free:
                break
            if slot.waiting:
                pos = free.pop(int(rng.integers(len(free))))
                slots[i] = AgentSlot(pos=pos, dest=self._draw_destination(pos, rng))


def detect_collisions(prev: Sequence[Position], nxt: Sequence[Position]) -> Set[int]:
    """
    Indices of movers that end on the same cell or swap cells.

    Args:
        prev: Positions before the move
        nxt: Positions after the move, same order

    Returns:
        Set of colliding indices
    """
    if len(prev) != len(nxt):
        raise ContractViolation(f"position lists differ in length: {len(prev)} vs {len(nxt)}")

    hit: Set[int] = set()
    by_cell: Dict[Position, List[int]] = {}
    for i, cell in enumerate(nxt):
        by_cell.setdefault(cell, []).append(i)
    for indices in by_cell.values():
        if len(indices) > 1:
            hit.update(indices)

    came_from = {cell: i for i, cell in enumerate(prev)}
    for i, cell in enumerate(nxt):
        if cell == prev[i]:
            continue
        j = came_from.get(cell)
        if j is not None and j != i and nxt[j] == prev[i]:
            hit.update((i, j))
    return hit


def feature_dim(id_slots: int) -> int:
    """Length of an encoded observation with ``id_slots`` identity slots."""
    return 2 + 9 * N_CELL_CODES + 2 + 1 + id_slots


def encode_observation(
    obs: Optional[LocalObservation],
    layout: GridLayout,
    agent_index: int,
    id_slots: int,
) -> np.ndarray:
    """
    Flatten an observation into the network input vector.

    Layout: normalized own row/col, one-hot 3x3 mask, normalized target
    row/col, step fraction, one-hot agent identity. The identity block comes
    last so widening it only appends coordinates. Vehicles off the grid
    encode as zeros apart from their identity.

    Raises:
        ContractViolation: If agent_index does not fit in id_slots
    """
    if not 0 <= agent_index < id_slots:
        raise ContractViolation(f"agent index {agent_index} needs more than {id_slots} identity slots")

    vec = np.zeros(feature_dim(id_slots), dtype=np.float64)
    vec[feature_dim(0) + agent_index] = 1.0
    if obs is None:
        return vec

    scale_r = max(layout.height - 1, 1)
    scale_c = max(layout.width - 1, 1)
    vec[0] = obs.own_position.row / scale_r
    vec[1] = obs.own_position.col / scale_c
    for cell, code in enumerate(c for row in obs.mask for c in row):
        vec[2 + cell * N_CELL_CODES + code] = 1.0
    offset = 2 + 9 * N_CELL_CODES
    if obs.target is not None:
        vec[offset] = obs.target.row / scale_r
        vec[offset + 1] = obs.target.col / scale_c
    vec[offset + 2] = obs.step_fraction or 0.0
    return vec


def encode_all(
    observations: Sequence[Optional[LocalObservation]],
    layout: GridLayout,
    id_slots: int,
) -> np.ndarray:
    """Stack the encodings of every vehicle, one row per agent id."""
    return np.stack([
        encode_observation(obs, layout, i, id_slots)
        for i, obs in enumerate(observations)
    ])
