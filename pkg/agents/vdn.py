"""
Value Decomposition Networks under centralised training.

The joint value is the sum of per-agent values. All agents share one
network (parameter sharing) and are told apart by the identity block of
their observation vectors.
"""

import itertools
from typing import Sequence

import numpy as np

from envs.gridworld import N_ACTIONS
from utils.errors import ContractViolation
from .dqn import DqnAgent, JointTransition, ReplayBuffer, squared_td_error
from .network import DEFAULT_CLIP_NORM, optimizer_step

IGM_MAX_AGENTS = 6


def vdn_qtot(per_agent_q: Sequence[np.ndarray], actions: Sequence[int]) -> float:
    """
    Additive mixer: Q_tot = sum_i Q_i(tau_i, a_i).

    Raises:
        ContractViolation: On empty input, mismatched lengths or an action
            index out of range
    """
    if len(per_agent_q) < 1:
        raise ContractViolation("vdn_qtot needs at least one agent")
    if len(per_agent_q) != len(actions):
        raise ContractViolation(f"{len(per_agent_q)} Q-vectors but {len(actions)} actions")
    total = 0.0
    for i, (q, a) in enumerate(zip(per_agent_q, actions)):
        if not 0 <= int(a) < len(q):
            raise ContractViolation(f"action {a} of agent {i} is out of range for {len(q)} values")
        total += float(q[int(a)])
    return total


def igm_check(per_agent_q: Sequence[np.ndarray]) -> bool:
    """
    Check that the per-agent greedy actions maximise Q_tot.

    Enumerates every joint action, so it refuses more than IGM_MAX_AGENTS
    agents.

    Returns:
        True iff the tuple of per-agent argmaxes attains the joint maximum
    """
    n = len(per_agent_q)
    if n < 1:
        raise ContractViolation("igm_check needs at least one agent")
    if n > IGM_MAX_AGENTS:
        raise ContractViolation(f"igm_check enumerates 5^N joint actions; refusing N={n} > {IGM_MAX_AGENTS}")
    for i, q in enumerate(per_agent_q):
        if len(q) != N_ACTIONS:
            raise ContractViolation(f"agent {i} has {len(q)} action values, expected {N_ACTIONS}")

    greedy = [int(np.argmax(q)) for q in per_agent_q]
    greedy_value = vdn_qtot(per_agent_q, greedy)
    best = max(
        vdn_qtot(per_agent_q, joint)
        for joint in itertools.product(range(N_ACTIONS), repeat=n)
    )
    return greedy_value >= best


def vdn_train_step(
    shared_agent: DqnAgent,
    buffer: ReplayBuffer,
    batch_size: int,
    gamma: float,
    lr: float,
    clip_norm: float = DEFAULT_CLIP_NORM,
) -> float:
    """
    One VDN update of the shared network on a batch of joint transitions.

    Q_tot sums the shared online network's values at every active agent's
    chosen action. The target sums per-agent maxima of the shared target
    network over agents still active, which equals the joint max of an
    additive mixer. Gradients of all agents accumulate into the one set of
    shared parameters.

    Returns:
        Batch loss before the update

    Raises:
        ContractViolation: If the buffer holds fewer than batch_size items
    """
    batch = buffer.sample(batch_size)
    return _vdn_update(shared_agent, batch, gamma, lr, clip_norm)


def _vdn_update(agent: DqnAgent, batch: Sequence[JointTransition], gamma: float, lr: float, clip_norm: float) -> float:
    n_agents = batch[0].obs.shape[0]
    if any(t.obs.shape[0] != n_agents for t in batch):
        raise ContractViolation("joint transitions in one batch disagree on the agent count")

    size = len(batch)
    obs = np.stack([t.obs for t in batch])
    dim = obs.shape[-1]
    flat_obs = obs.reshape(size * n_agents, dim)
    flat_next = np.stack([t.next_obs for t in batch]).reshape(size * n_agents, dim)
    actions = np.stack([t.actions for t in batch]).astype(np.int64)
    active = np.stack([t.active for t in batch]).astype(np.float64)
    next_active = np.stack([t.next_active for t in batch]).astype(np.float64)
    rewards = np.array([t.team_reward for t in batch], dtype=np.float64)
    dones = np.array([t.done for t in batch], dtype=np.float64)

    q = agent.online.forward(flat_obs).reshape(size, n_agents, -1)
    rows = np.arange(size)[:, None]
    cols = np.arange(n_agents)[None, :]
    taken = q[rows, cols, actions]
    q_tot = (taken * active).sum(axis=1)

    next_max = agent.target.forward(flat_next).reshape(size, n_agents, -1).max(axis=2)
    next_tot = (next_max * next_active).sum(axis=1)

    loss, d_tot = squared_td_error(q_tot, rewards, next_tot, dones, gamma)

    output_grad = np.zeros_like(q)
    output_grad[rows, cols, actions] = d_tot[:, None] * active
    grads = agent.online.backward(flat_obs, output_grad.reshape(size * n_agents, -1))
    optimizer_step(agent.online, grads, lr, clip_norm)
    return loss
