"""
Deep multi-agent training on the junction.

VDN pretraining of one shared network under centralised training, IDQL
training of independent agents (from scratch or from a transferred policy),
and greedy evaluation of either.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import trange

from agents.dqn import DqnAgent, JointTransition, ReplayBuffer, Transition, idql_train_step
from agents.network import DEFAULT_CLIP_NORM, init_network
from agents.tabular import linear_epsilon
from agents.vdn import vdn_train_step
from envs.gridworld import N_ACTIONS, Action
from envs.multi import MultiEnvConfig, MultiJunctionEnv, encode_all, feature_dim
from utils.errors import ContractViolation
from utils.metrics import MetricsRow
from .tabular import EvaluationSummary, action_rng, log_run_summary

logger = logging.getLogger(__name__)

NETWORK_STREAM = 2
BUFFER_STREAM = 3


@dataclass(frozen=True)
class DeepParams:
    """
    Deep Q-learning hyperparameters.

    Attributes:
        gamma: Discount factor in [0, 1)
        lr: Gradient-descent step size
        batch_size: Transitions per update
        buffer_capacity: Replay buffer size
        target_sync: Training steps between target-network syncs
        hidden: Hidden layer widths
        warmup: Transitions collected before the first update
        train_every: Environment ticks per update
        clip_norm: Global gradient-norm ceiling
        epsilon_start: Exploration rate of the first episode
        epsilon_end: Exploration rate after the decay
        epsilon_decay_episodes: Episodes over which epsilon decays linearly
    """
    gamma: float = 0.95
    lr: float = 5e-4
    batch_size: int = 32
    buffer_capacity: int = 50_000
    target_sync: int = 200
    hidden: Tuple[int, ...] = (64, 64)
    warmup: int = 500
    train_every: int = 1
    clip_norm: float = DEFAULT_CLIP_NORM
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 700

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ContractViolation(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.lr < 0:
            raise ContractViolation(f"lr must be non-negative, got {self.lr}")
        for name in ("batch_size", "buffer_capacity", "target_sync", "train_every", "epsilon_decay_episodes"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be positive, got {getattr(self, name)}")
        if self.batch_size > self.buffer_capacity:
            raise ContractViolation("batch_size cannot exceed buffer_capacity")
        if self.warmup < 0 or any(width < 1 for width in self.hidden):
            raise ContractViolation("warmup must be non-negative and hidden widths positive")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ContractViolation("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.clip_norm <= 0:
            raise ContractViolation(f"clip_norm must be positive, got {self.clip_norm}")

    def epsilon_at(self, episode: int) -> float:
        return linear_epsilon(self.epsilon_start, self.epsilon_end, self.epsilon_decay_episodes, episode)

    @property
    def min_buffer(self) -> int:
        return max(self.warmup, self.batch_size)


def derived_seed(seed: int, stream: int, index: int = 0) -> int:
    """Independent integer seed for one named random stream of a run."""
    return int(np.random.SeedSequence([seed, stream, index]).generate_state(1)[0])


def new_agent(input_dim: int, params: DeepParams, seed: int) -> DqnAgent:
    """Freshly initialised agent with its target synced to the online network."""
    return DqnAgent(init_network([input_dim, *params.hidden, N_ACTIONS], seed))


def resolve_id_slots(env_config: MultiEnvConfig, id_slots: Optional[int]) -> int:
    slots = env_config.n_agents if id_slots is None else id_slots
    if slots < env_config.n_agents:
        raise ContractViolation(f"{slots} identity slots cannot label {env_config.n_agents} agents")
    return slots


def train_vdn(
    env_config: MultiEnvConfig,
    params: DeepParams,
    episodes: int,
    id_slots: Optional[int] = None,
    agent: Optional[DqnAgent] = None,
    run_id: str = "vdn",
    progress: bool = False,
    log_every: int = 0,
) -> Tuple[DqnAgent, List[MetricsRow]]:
    """
    Centralised VDN training of one network shared by every agent.

    A team transition is terminal once every vehicle has arrived; running
    out of steps still bootstraps from the next observation.

    Args:
        env_config: Junction to train on
        params: Deep learning hyperparameters
        episodes: Number of training episodes
        id_slots: Identity slots in the encoding; set it above n_agents to
            pad the network for a larger junction
        agent: Shared agent to continue training (a new one otherwise)
        run_id: Series name written into the metrics rows
        progress: Show a progress bar on stderr
        log_every: Emit a DEBUG line every this many episodes (0 disables)

    Returns:
        (shared agent, one MetricsRow per episode with the team return)
    """
    if episodes < 1:
        raise ContractViolation(f"episodes must be at least 1, got {episodes}")
    slots = resolve_id_slots(env_config, id_slots)
    seed = env_config.seed
    env = MultiJunctionEnv(env_config)
    rng = action_rng(seed)
    if agent is None:
        agent = new_agent(feature_dim(slots), params, derived_seed(seed, NETWORK_STREAM))
    buffer: ReplayBuffer[JointTransition] = ReplayBuffer(params.buffer_capacity, derived_seed(seed, BUFFER_STREAM))

    rows: List[MetricsRow] = []
    ticks = 0
    for episode in trange(episodes, desc=run_id, disable=not progress, leave=False):
        epsilon = params.epsilon_at(episode)
        state, obs = env.reset()
        x = encode_all(obs, env.layout, slots)
        total, collisions = 0.0, 0
        while not state.done:
            active = state.active
            actions = _joint_actions([agent] * env.n_agents, x, active, epsilon, rng)
            next_state, obs, rewards, _ = env.step(state, [Action(a) for a in actions])
            x_next = encode_all(obs, env.layout, slots)
            team_reward = math.fsum(rewards)
            buffer.push(JointTransition(
                obs=x,
                actions=np.array(actions),
                team_reward=team_reward,
                next_obs=x_next,
                done=all(slot.arrived for slot in next_state.agents),
                active=np.array(active, dtype=np.float64),
                next_active=np.array(next_state.active, dtype=np.float64),
            ))
            ticks += 1
            if len(buffer) >= params.min_buffer and ticks % params.train_every == 0:
                vdn_train_step(agent, buffer, params.batch_size, params.gamma, params.lr, params.clip_norm)
                agent.note_update(params.target_sync)

            total += team_reward
            collisions += next_state.collisions
            state, x = next_state, x_next

        rows.append(MetricsRow(run_id, seed, episode, total, collisions, state.step, epsilon))
        _maybe_log(run_id, seed, episode, total, epsilon, log_every)

    log_run_summary(run_id, seed, rows)
    return agent, rows


def train_idql(
    env_config: MultiEnvConfig,
    params: DeepParams,
    episodes: int,
    agents: Optional[Sequence[DqnAgent]] = None,
    id_slots: Optional[int] = None,
    run_id: str = "idql",
    progress: bool = False,
    log_every: int = 0,
) -> Tuple[List[DqnAgent], List[MetricsRow]]:
    """
    Fully decentralised training: every agent learns from its own rewards.

    Each agent keeps a private replay buffer and updates once it holds
    ``params.min_buffer`` transitions. A transition is terminal for an agent
    only when it arrives; running out of steps is not.

    Args:
        agents: Starting agents, one per vehicle (e.g. from build_transfer);
            fresh independent networks otherwise

    Returns:
        (agents, one MetricsRow per episode with the summed return)
    """
    if episodes < 1:
        raise ContractViolation(f"episodes must be at least 1, got {episodes}")
    slots = resolve_id_slots(env_config, id_slots)
    seed = env_config.seed
    env = MultiJunctionEnv(env_config)
    rng = action_rng(seed)
    if agents is None:
        agents = [
            new_agent(feature_dim(slots), params, derived_seed(seed, NETWORK_STREAM, i))
            for i in range(env.n_agents)
        ]
    agents = list(agents)
    if len(agents) != env.n_agents:
        raise ContractViolation(f"{len(agents)} agents for a {env.n_agents}-agent junction")
    if agents[0].online.input_dim != feature_dim(slots):
        raise ContractViolation(
            f"agents take {agents[0].online.input_dim} inputs but the encoding has {feature_dim(slots)}"
        )
    buffers: List[ReplayBuffer[Transition]] = [
        ReplayBuffer(params.buffer_capacity, derived_seed(seed, BUFFER_STREAM, i)) for i in range(env.n_agents)
    ]

    rows: List[MetricsRow] = []
    ticks = 0
    for episode in trange(episodes, desc=run_id, disable=not progress, leave=False):
        epsilon = params.epsilon_at(episode)
        state, obs = env.reset()
        x = encode_all(obs, env.layout, slots)
        total, collisions = 0.0, 0
        while not state.done:
            active = state.active
            actions = _joint_actions(agents, x, active, epsilon, rng)
            next_state, obs, rewards, _ = env.step(state, [Action(a) for a in actions])
            x_next = encode_all(obs, env.layout, slots)
            for i, was_active in enumerate(active):
                if was_active:
                    arrived = next_state.agents[i].arrived
                    buffers[i].push(Transition(x[i], actions[i], rewards[i], x_next[i], arrived))
            ticks += 1
            if ticks % params.train_every == 0:
                ready = [i for i in range(env.n_agents) if len(buffers[i]) >= params.min_buffer]
                if ready:
                    idql_train_step(
                        [agents[i] for i in ready],
                        [buffers[i] for i in ready],
                        params.batch_size,
                        params.gamma,
                        params.lr,
                        params.clip_norm,
                    )
                    for i in ready:
                        agents[i].note_update(params.target_sync)

            total += math.fsum(rewards)
            collisions += next_state.collisions
            state, x = next_state, x_next

        rows.append(MetricsRow(run_id, seed, episode, total, collisions, state.step, epsilon))
        _maybe_log(run_id, seed, episode, total, epsilon, log_every)

    log_run_summary(run_id, seed, rows)
    return agents, rows


def evaluate_policy(
    agents: Sequence[DqnAgent],
    env_config: MultiEnvConfig,
    episodes: int,
    id_slots: Optional[int] = None,
) -> EvaluationSummary:
    """
    Greedy rollouts with no learning.

    A single agent is shared by every vehicle (a VDN policy); otherwise
    there must be one agent per vehicle.
    """
    if episodes < 1:
        raise ContractViolation(f"episodes must be at least 1, got {episodes}")
    slots = resolve_id_slots(env_config, id_slots)
    env = MultiJunctionEnv(env_config)
    agents = list(agents) * env.n_agents if len(agents) == 1 else list(agents)
    if len(agents) != env.n_agents:
        raise ContractViolation(f"{len(agents)} agents for a {env.n_agents}-agent junction")
    rng = action_rng(env_config.seed)

    returns, steps, collisions = [], [], 0
    for _ in range(episodes):
        state, obs = env.reset()
        total = 0.0
        while not state.done:
            x = encode_all(obs, env.layout, slots)
            actions = _joint_actions(agents, x, state.active, 0.0, rng)
            state, obs, rewards, _ = env.step(state, [Action(a) for a in actions])
            total += math.fsum(rewards)
            collisions += state.collisions
        returns.append(total)
        steps.append(state.step)
    return EvaluationSummary(
        episodes=episodes,
        mean_return=math.fsum(returns) / episodes,
        collisions=collisions,
        mean_steps=sum(steps) / episodes,
    )


def _joint_actions(
    agents: Sequence[DqnAgent], x: np.ndarray, active: Sequence[bool], epsilon: float, rng: np.random.Generator
) -> List[int]:
    # Vehicles off the grid hold still and consume no random draws.
    return [
        agent.act(x[i], epsilon, rng) if is_active else int(Action.STAY)
        for i, (agent, is_active) in enumerate(zip(agents, active))
    ]


def _maybe_log(run_id: str, seed: int, episode: int, total: float, epsilon: float, log_every: int) -> None:
    if log_every and (episode + 1) % log_every == 0:
        logger.debug("%s seed %d episode %d: return %.3f, epsilon %.3f", run_id, seed, episode, total, epsilon)

