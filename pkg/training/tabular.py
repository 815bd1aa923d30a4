"""
Tabular training and greedy evaluation on the single-agent junction.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from tqdm import trange

from agents.tabular import LearningParams, QTable, QTableMetadata, q_update, select_action
from envs.gridworld import Action, state_key
from envs.single import SingleEnvConfig, SingleJunctionEnv
from utils.errors import ContractViolation
from utils.metrics import MetricsRow

logger = logging.getLogger(__name__)

# Second entropy word of the action-selection generator; the environment
# draws from the bare config seed.
ACTION_STREAM = 1
SUMMARY_WINDOW = 50


@dataclass(frozen=True)
class EvaluationSummary:
    """Outcome of greedy rollouts without learning."""
    episodes: int
    mean_return: float
    collisions: int
    mean_steps: float


def action_rng(seed: int) -> np.random.Generator:
    """Exploration generator of a run, independent of the environment stream."""
    return np.random.default_rng(np.random.SeedSequence([seed, ACTION_STREAM]))


def train_tabular(
    env_config: SingleEnvConfig,
    params: LearningParams,
    episodes: int,
    init: Optional[QTable] = None,
    frozen: bool = False,
    run_id: str = "tabular",
    progress: bool = False,
    log_every: int = 0,
) -> Tuple[QTable, List[MetricsRow]]:
    """
    Epsilon-greedy Q-learning on one single-agent task.

    Args:
        env_config: Task to learn; its seed drives both episode generation
            and exploration
        params: Learning rate, discount and exploration schedule
        episodes: Number of training episodes
        init: Table to start from (copied, never mutated)
        frozen: Act greedily and skip every update (evaluates ``init``)
        run_id: Series name written into the metrics rows
        progress: Show a progress bar on stderr
        log_every: Emit a DEBUG line every this many episodes (0 disables)

    Returns:
        (final table, one MetricsRow per episode)

    Raises:
        ContractViolation: If episodes < 1
    """
    if episodes < 1:
        raise ContractViolation(f"episodes must be at least 1, got {episodes}")

    env = SingleJunctionEnv(env_config)
    rng = action_rng(env_config.seed)
    table = init.copy() if init is not None else QTable()
    table.metadata = QTableMetadata(variant=env_config.variant.value, episodes=episodes)

    rows: List[MetricsRow] = []
    for episode in trange(episodes, desc=run_id, disable=not progress, leave=False):
        epsilon = 0.0 if frozen else params.epsilon_at(episode)
        state, obs = env.reset()
        key = state_key(obs)
        total, collisions = 0.0, 0
        while not state.done:
            action = select_action(table, key, epsilon, rng)
            state, obs, reward, _ = env.step(state, Action(action))
            next_key = state_key(obs)
            if not frozen:
                # Truncation is not terminal; only the goal ends the return.
                q_update(table, key, action, reward, next_key, state.reached_goal, params)
            key = next_key
            total += reward
            collisions += int(state.collided)

        rows.append(MetricsRow(run_id, env_config.seed, episode, total, collisions, state.step, epsilon))
        if log_every and (episode + 1) % log_every == 0:
            logger.debug("%s seed %d episode %d: return %.3f, epsilon %.3f", run_id, env_config.seed, episode, total, epsilon)

    log_run_summary(run_id, env_config.seed, rows)
    return table, rows


def evaluate_qtable(table: QTable, env_config: SingleEnvConfig, episodes: int) -> EvaluationSummary:
    """
    Greedy rollouts of a table; the table is left untouched.

    Raises:
        ContractViolation: If episodes < 1
    """
    if episodes < 1:
        raise ContractViolation(f"episodes must be at least 1, got {episodes}")
    env = SingleJunctionEnv(env_config)
    returns, steps, collisions = [], [], 0
    for _ in range(episodes):
        state, obs = env.reset()
        total = 0.0
        while not state.done:
            state, obs, reward, _ = env.step(state, Action(table.greedy(state_key(obs))))
            total += reward
            collisions += int(state.collided)
        returns.append(total)
        steps.append(state.step)
    return EvaluationSummary(
        episodes=episodes,
        mean_return=math.fsum(returns) / episodes,
        collisions=collisions,
        mean_steps=sum(steps) / episodes,
    )


def log_run_summary(run_id: str, seed: int, rows: List[MetricsRow]) -> None:
    tail = rows[-SUMMARY_WINDOW:]
    logger.info(
        "%s seed %d: %d episodes, last-%d mean return %.3f, %d collisions",
        run_id,
        seed,
        len(rows),
        len(tail),
        math.fsum(r.return_total for r in tail) / len(tail),
        sum(r.collisions for r in rows),
    )
