"""
Training loops for the staged pipelines.

``training.experiment`` runs whole configured stages and is imported on its
own, since it depends on the ``config`` package.
"""

from .deep import DeepParams, evaluate_policy, train_idql, train_vdn
from .tabular import EvaluationSummary, evaluate_qtable, train_tabular

__all__ = [
    "DeepParams",
    "evaluate_policy",
    "train_idql",
    "train_vdn",
    "EvaluationSummary",
    "evaluate_qtable",
    "train_tabular",
]
