"""
Experiment configuration for the staged RL workbench.

Shipped ``*.cfg`` files in this directory cover every pipeline stage.
"""

from .settings import (
    ExperimentConfig,
    EnvSettings,
    LearningSettings,
    Stage,
    load_config,
    parse_config,
    parse_seeds,
    with_overrides,
)

__all__ = [
    "ExperimentConfig",
    "EnvSettings",
    "LearningSettings",
    "Stage",
    "load_config",
    "parse_config",
    "parse_seeds",
    "with_overrides",
]
