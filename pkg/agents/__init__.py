"""
Learners for the junction environments.

Tabular Q-learning with table merging, a small dense network with its own
backward pass, DQN-style agents trained independently (IDQL) or jointly
through an additive value decomposition (VDN), and the transfer of a shared
pretrained policy into independent agents.
"""

from .dqn import (
    DqnAgent,
    JointTransition,
    ReplayBuffer,
    Transition,
    idql_train_step,
    squared_td_error,
    sync_target,
    td_loss,
)
from .network import (
    DenseLayer,
    DenseNet,
    Gradients,
    init_network,
    load_weights,
    optimizer_step,
    save_weights,
)
from .tabular import (
    LearningParams,
    QTable,
    QTableMetadata,
    load_qtable,
    merge_tables,
    q_update,
    save_qtable,
    select_action,
)
from .transfer import build_transfer, pad_network, replicate_policy
from .vdn import igm_check, vdn_qtot, vdn_train_step

__all__ = [
    "DqnAgent",
    "JointTransition",
    "ReplayBuffer",
    "Transition",
    "idql_train_step",
    "squared_td_error",
    "sync_target",
    "td_loss",
    "DenseLayer",
    "DenseNet",
    "Gradients",
    "init_network",
    "load_weights",
    "optimizer_step",
    "save_weights",
    "LearningParams",
    "QTable",
    "QTableMetadata",
    "load_qtable",
    "merge_tables",
    "q_update",
    "save_qtable",
    "select_action",
    "build_transfer",
    "pad_network",
    "replicate_policy",
    "igm_check",
    "vdn_qtot",
    "vdn_train_step",
]
