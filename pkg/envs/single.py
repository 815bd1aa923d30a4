"""
Single-agent traffic junction.

One agent enters through an arm end and must reach a goal cell while a
hardcoded adversary vehicle chases it. The task comes in three variants:
goal reaching only, collision avoidance only, and the joint task.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

from utils.errors import ConfigurationError, ContractViolation
from .base import BaseJunctionEnv
from .gridworld import (
    Action,
    CellCode,
    GridLayout,
    LocalObservation,
    Position,
    apply_action,
    build_junction_layout,
    manhattan,
    observe,
)


class SingleVariant(str, Enum):
    GOAL_ONLY = "goal"
    AVOID_ONLY = "avoid"
    JOINT = "joint"

    @property
    def has_goal(self) -> bool:
        return self is not SingleVariant.AVOID_ONLY

    @property
    def has_adversary(self) -> bool:
        return self is not SingleVariant.GOAL_ONLY


@dataclass(frozen=True)
class SingleEnvConfig:
    """
    Single-agent junction settings.

    Attributes:
        variant: Which sub-task (or the joint task) to pose
        layout: Junction map, 7x7 single-lane by default
        max_steps: Episode truncation length
        goal_reward: Reward for reaching the goal (terminal)
        collision_penalty: Reward added on every tick the adversary hits the agent
        seed: Seed of the episode generator
        adversary_period: The adversary moves on ticks where step % period == 0
    """
    variant: SingleVariant = SingleVariant.JOINT
    layout: GridLayout = build_junction_layout(3, 1)
    max_steps: int = 50
    goal_reward: float = 5.0
    collision_penalty: float = -0.2
    seed: int = 0
    adversary_period: int = 1

    def __post_init__(self):
        if not self.goal_reward > 0 > self.collision_penalty:
            raise ConfigurationError(
                f"need goal_reward > 0 > collision_penalty, got {self.goal_reward} and {self.collision_penalty}"
            )
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be positive, got {self.max_steps}")
        if self.adversary_period < 1:
            raise ConfigurationError(f"adversary_period must be positive, got {self.adversary_period}")
        if len(self.layout.spawn_points) < 2 and self.variant.has_goal:
            raise ConfigurationError("goal variants need at least two spawn points")


@dataclass(frozen=True)
class SingleEnvState:
    """
    Episode state.

    Attributes:
        agent: Agent cell
        adversary: Adversary cell, absent in the goal-only variant
        goal: Goal cell, absent in the avoid-only variant
        destination: Spawn point the agent is heading for; equals goal when
            there is one, and carries no reward in the avoid-only variant
        step: Ticks taken so far
        done: Whether the episode has ended
        reached_goal: Whether it ended on the goal (terminal, not truncated)
        collided: Whether the last tick was a collision
    """
    agent: Position
    adversary: Optional[Position]
    goal: Optional[Position]
    destination: Optional[Position] = None
    step: int = 0
    done: bool = False
    reached_goal: bool = False
    collided: bool = False


class SingleJunctionEnv(BaseJunctionEnv):
    """Single-agent junction with goal reaching and a chasing adversary."""

    def __init__(self, config: SingleEnvConfig):
        super().__init__(config.seed)
        self.config = config
        self.layout = config.layout
        self.max_steps = config.max_steps

    def reset(self) -> Tuple[SingleEnvState, LocalObservation]:
        """
        Draw a new episode.

        The agent enters on a uniformly chosen spawn point and heads for a
        different spawn point, which is the goal in the goal variants. The
        adversary starts on a road cell at Manhattan distance >= 2 from the
        agent, off the destination.

        Every variant draws the same sequence, so the avoid-only and joint
        tasks produce observations keyed alike.
        """
        variant = self.config.variant
        spawns = self.layout.spawn_points
        agent = spawns[int(self._rng.integers(len(spawns)))]

        destination = None
        others = [p for p in spawns if p != agent]
        if others:
            destination = others[int(self._rng.integers(len(others)))]
        goal = destination if variant.has_goal else None

        adversary = None
        if variant.has_adversary:
            candidates = sorted(
                p for p in self.layout.road_cells
                if manhattan(p, agent) >= 2 and p != destination
            )
            adversary = candidates[int(self._rng.integers(len(candidates)))]

        state = SingleEnvState(agent=agent, adversary=adversary, goal=goal, destination=destination)
        return state, self.observation(state)

    def step(
        self, state: SingleEnvState, action: Action
    ) -> Tuple[SingleEnvState, LocalObservation, float, bool]:
        """
        Move the agent, then the adversary, then score the tick.

        Reaching the goal pays goal_reward and ends the episode. A collision
        (same cell, or the two vehicles swapping cells) adds collision_penalty
        and the episode continues. Reaching max_steps truncates.

        Raises:
            ContractViolation: If the episode is already finished
        """
        if state.done:
            raise ContractViolation("cannot step a finished episode; call reset()")

        agent = apply_action(state.agent, action, self.layout)
        adversary = state.adversary
        if adversary is not None and state.step % self.config.adversary_period == 0:
            adversary = adversary_move(replace(state, agent=agent), self.layout)

        reward = 0.0
        hit = adversary is not None and collided(state.agent, agent, state.adversary, adversary)
        reached = state.goal is not None and agent == state.goal
        if reached:
            reward += self.config.goal_reward
        if hit:
            reward += self.config.collision_penalty

        step = state.step + 1
        done = reached or step >= self.max_steps
        next_state = SingleEnvState(
            agent=agent,
            adversary=adversary,
            goal=state.goal,
            destination=state.destination,
            step=step,
            done=done,
            reached_goal=reached,
            collided=hit,
        )
        return next_state, self.observation(next_state), reward, done

    def observation(self, state: SingleEnvState) -> LocalObservation:
        occupied = {}
        if state.adversary is not None:
            occupied[state.adversary] = int(CellCode.OTHER_VEHICLE)
        goals = () if state.goal is None else (state.goal,)
        target = state.goal if state.goal is not None else state.destination
        return observe(self.layout, occupied, state.agent, goals=goals, target=target)


def collided(agent_prev: Position, agent_next: Position, other_prev: Position, other_next: Position) -> bool:
    """Same-cell or swap-through collision between two movers."""
    if agent_next == other_next:
        return True
    return agent_next == other_prev and other_next == agent_prev and agent_prev != agent_next


def adversary_move(state: SingleEnvState, layout: GridLayout) -> Position:
    """
    Greedy chase: step to the neighbour (or stay) closest to the agent.

    ``state.agent`` must already hold the agent's new cell. Ties go to the
    first action in Up, Down, Left, Right, Stay order.

    Raises:
        ContractViolation: If the state has no adversary
    """
    if state.adversary is None:
        raise ContractViolation("state has no adversary to move")
    best = state.adversary
    best_distance = None
    for act in Action:
        candidate = apply_action(state.adversary, act, layout)
        distance = manhattan(candidate, state.agent)
        if best_distance is None or distance < best_distance:
            best, best_distance = candidate, distance
    return best
