"""
Moving a centrally trained shared policy into independent learners.

The shared network is widened to the target environment's observation size
by zero-padding its first layer, then copied once per agent.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from envs.multi import MultiEnvConfig, feature_dim
from utils.errors import ContractViolation, WeightsLoadError
from .dqn import DqnAgent, sync_target
from .network import DenseLayer, DenseNet, load_weights

logger = logging.getLogger(__name__)


def pad_network(net: DenseNet, new_input_dim: int) -> DenseNet:
    """
    Widen the input of a network with zero-weight columns.

    The padded network returns exactly the original outputs on inputs whose
    appended coordinates are zero. A request for the current width returns
    an equal copy.

    Raises:
        ContractViolation: If new_input_dim is smaller than the current input
    """
    if new_input_dim < net.input_dim:
        raise ContractViolation(f"cannot shrink input dimension {net.input_dim} to {new_input_dim}")

    padded = net.copy()
    first = padded.layers[0]
    extra = np.zeros((first.out_dim, new_input_dim - first.in_dim))
    padded.layers[0] = DenseLayer(np.hstack([first.weights, extra]), first.biases)
    return padded


def replicate_policy(net: DenseNet, n: int) -> List[DenseNet]:
    """n deep copies of a network; none shares an array with another."""
    if n < 1:
        raise ContractViolation(f"need at least one replica, got {n}")
    return [net.copy() for _ in range(n)]


def build_transfer(
    weights_path: Union[str, Path],
    target_env: MultiEnvConfig,
    id_slots: Optional[int] = None,
) -> List[DqnAgent]:
    """
    Load a pretrained shared policy and turn it into independent agents.

    Args:
        weights_path: Shared network written by the VDN pretraining stage
        target_env: Environment the agents will act in
        id_slots: Identity slots of the target encoding (defaults to the
            target agent count)

    Returns:
        One DqnAgent per target agent, each with a target network synced to
        its online network

    Raises:
        WeightsLoadError: If the file is unreadable, malformed, or wider than
            the target observation
    """
    id_slots = target_env.n_agents if id_slots is None else id_slots
    net = load_weights(weights_path)
    required = feature_dim(id_slots)
    if net.input_dim > required:
        raise WeightsLoadError(
            f"{weights_path}: network expects {net.input_dim} inputs but the "
            f"{target_env.n_agents}-agent junction encodes {required}"
        )
    if net.input_dim < required:
        logger.info("Padding transferred network input from %d to %d", net.input_dim, required)
        net = pad_network(net, required)

    agents = [sync_target(DqnAgent(replica)) for replica in replicate_policy(net, target_env.n_agents)]
    logger.info("Built %d transferred agents from %s", len(agents), weights_path)
    return agents
