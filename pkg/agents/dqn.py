"""
Deep Q-learning machinery.

Experience replay, online/target network pairs, the squared TD loss with a
frozen bootstrap target, and fully independent per-agent updates (IDQL).
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque, Generic, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from utils.errors import ContractViolation
from .network import DEFAULT_CLIP_NORM, DenseNet, Gradients, optimizer_step

T = TypeVar("T")


@dataclass(frozen=True)
class Transition:
    """One agent's experience tuple (obs, action, reward, next_obs, done)."""
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ContractViolation(f"reward must be finite, got {self.reward}")
        if self.obs.shape != self.next_obs.shape:
            raise ContractViolation(f"obs shape {self.obs.shape} differs from next_obs {self.next_obs.shape}")


@dataclass(frozen=True)
class JointTransition:
    """
    Team experience for value factorization.

    Attributes:
        obs: (N, D) per-agent observations
        actions: (N,) per-agent actions
        team_reward: Sum of the per-agent rewards of the tick
        next_obs: (N, D) per-agent next observations
        done: Episode end flag
        active: (N,) agents on the grid when acting
        next_active: (N,) agents still on the grid afterwards
    """
    obs: np.ndarray
    actions: np.ndarray
    team_reward: float
    next_obs: np.ndarray
    done: bool
    active: np.ndarray
    next_active: np.ndarray

    def __post_init__(self):
        n = self.obs.shape[0]
        for name in ("actions", "active", "next_active"):
            if len(getattr(self, name)) != n:
                raise ContractViolation(f"{name} has {len(getattr(self, name))} entries for {n} agents")
        if self.next_obs.shape != self.obs.shape:
            raise ContractViolation("obs and next_obs shapes differ")
        if not np.isfinite(self.team_reward):
            raise ContractViolation(f"team reward must be finite, got {self.team_reward}")


class ReplayBuffer(Generic[T]):
    """
    Fixed-capacity ring of experience; the oldest entries are evicted first.

    Sampling draws indices uniformly with replacement from its own seeded
    generator.
    """

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 1:
            raise ContractViolation(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._items: Deque[T] = deque(maxlen=capacity)
        self._rng = np.random.default_rng(seed)

    def push(self, item: T) -> None:
        self._items.append(item)

    def sample(self, batch_size: int) -> List[T]:
        if batch_size < 1:
            raise ContractViolation(f"batch size must be positive, got {batch_size}")
        if len(self._items) < batch_size:
            raise ContractViolation(f"buffer holds {len(self._items)} items, need {batch_size}")
        indices = self._rng.integers(len(self._items), size=batch_size)
        return [self._items[int(i)] for i in indices]

    def __len__(self) -> int:
        return len(self._items)


class DqnAgent:
    """
    Online network theta plus frozen target network theta-minus.

    Attributes:
        online: Network being trained
        target: Copy of online used for bootstrap targets
        steps_since_sync: Training steps since the last target sync
    """

    def __init__(self, online: DenseNet, target: Optional[DenseNet] = None):
        self.online = online
        self.target = online.copy() if target is None else target
        if self.target.dims != self.online.dims:
            raise ContractViolation(f"target dims {self.target.dims} differ from online dims {self.online.dims}")
        self.steps_since_sync = 0

    def act(self, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        """Epsilon-greedy action for one observation; one uniform draw first."""
        if rng.random() < epsilon:
            return int(rng.integers(self.online.output_dim))
        return int(np.argmax(self.online.forward(obs)))

    def note_update(self, sync_every: int) -> None:
        """Count one training step and sync the target when due."""
        self.steps_since_sync += 1
        if sync_every > 0 and self.steps_since_sync >= sync_every:
            sync_target(self)


def sync_target(agent: DqnAgent) -> DqnAgent:
    """Copy online parameters into the target network and reset the counter."""
    agent.target = agent.online.copy()
    agent.steps_since_sync = 0
    return agent


def squared_td_error(
    taken_q: np.ndarray, rewards: np.ndarray, next_value: np.ndarray, dones: np.ndarray, gamma: float
) -> Tuple[float, np.ndarray]:
    """
    Mean squared TD error over a batch and its gradient w.r.t. taken_q.

    Args:
        taken_q: (B,) current estimates Q(tau, a)
        rewards: (B,) rewards
        next_value: (B,) max_a' Q(tau', a'; theta-minus)
        dones: (B,) terminal flags; a terminal drops the bootstrap term
        gamma: Discount factor

    Returns:
        (loss, d_loss / d_taken_q)
    """
    targets = rewards + gamma * (1.0 - dones) * next_value
    errors = targets - taken_q
    loss = float(np.mean(errors * errors))
    grad = -2.0 * errors / len(errors)
    return loss, grad


def td_loss(agent: DqnAgent, batch: Sequence[Transition], gamma: float) -> Tuple[float, Gradients]:
    """
    DQN loss on a batch: mean of (r + gamma max_a' Q(tau',a';theta-) - Q(tau,a;theta))^2.

    Gradients flow through the online network only.

    Raises:
        ContractViolation: If the batch is empty
    """
    if not batch:
        raise ContractViolation("td_loss needs a non-empty batch")

    obs = np.stack([t.obs for t in batch])
    next_obs = np.stack([t.next_obs for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.int64)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    dones = np.array([t.done for t in batch], dtype=np.float64)

    q = agent.online.forward(obs)
    rows = np.arange(len(batch))
    next_value = agent.target.forward(next_obs).max(axis=1)
    loss, d_taken = squared_td_error(q[rows, actions], rewards, next_value, dones, gamma)

    output_grad = np.zeros_like(q)
    output_grad[rows, actions] = d_taken
    return loss, agent.online.backward(obs, output_grad)


def idql_train_step(
    agents: Sequence[DqnAgent],
    buffers: Sequence[ReplayBuffer],
    batch_size: int,
    gamma: float,
    lr: float,
    clip_norm: float = DEFAULT_CLIP_NORM,
) -> List[float]:
    """
    Independent DQN updates: each agent learns from its own buffer only.

    Returns:
        Per-agent losses, in agent order

    Raises:
        ContractViolation: If the agent and buffer counts differ or a buffer
            is too small
    """
    if len(agents) != len(buffers):
        raise ContractViolation(f"{len(agents)} agents but {len(buffers)} buffers")
    losses = []
    for agent, buffer in zip(agents, buffers):
        batch = buffer.sample(batch_size)
        loss, grads = td_loss(agent, batch, gamma)
        optimizer_step(agent.online, grads, lr, clip_norm)
        losses.append(loss)
    return losses
