"""
Traffic junction environments.

This package contains the shared junction gridworld, the single-agent
junction used for task decomposition, and the multi-agent junction used for
CTDE pretraining and decentralized transfer.
"""

from .base import BaseJunctionEnv
from .gridworld import (
    N_ACTIONS,
    Action,
    CellCode,
    GridLayout,
    LocalObservation,
    Position,
    apply_action,
    build_junction_layout,
    observe,
    state_key,
)
from .multi import (
    MultiEnvConfig,
    MultiEnvState,
    MultiJunctionEnv,
    detect_collisions,
    encode_all,
    encode_observation,
    feature_dim,
)
from .single import SingleEnvConfig, SingleEnvState, SingleJunctionEnv, SingleVariant, adversary_move

__all__ = [
    "BaseJunctionEnv",
    "N_ACTIONS",
    "Action",
    "CellCode",
    "GridLayout",
    "LocalObservation",
    "Position",
    "apply_action",
    "build_junction_layout",
    "observe",
    "state_key",
    "MultiEnvConfig",
    "MultiEnvState",
    "MultiJunctionEnv",
    "detect_collisions",
    "encode_all",
    "encode_observation",
    "feature_dim",
    "SingleEnvConfig",
    "SingleEnvState",
    "SingleJunctionEnv",
    "SingleVariant",
    "adversary_move",
]
