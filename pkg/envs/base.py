"""
Base junction environment interface.

Both traffic junction environments follow this interface so the training
loops and the greedy evaluators can treat them uniformly.
"""

from abc import ABC, abstractmethod
from typing import Any, Tuple

import numpy as np

from .gridworld import GridLayout


class BaseJunctionEnv(ABC):
    """
    Abstract base class for junction environments.

    States are immutable values returned by ``reset`` and threaded through
    ``step``; the environment object only owns the seeded generator used to
    draw new episodes.
    """

    layout: GridLayout
    max_steps: int

    def __init__(self, seed: int):
        self._rng = np.random.default_rng(seed)

    @abstractmethod
    def reset(self) -> Tuple[Any, Any]:
        """
        Start a new episode.

        Returns:
            (state, observation) for the first tick
        """
        pass

    @abstractmethod
    def step(self, state: Any, action: Any) -> Tuple[Any, Any, Any, Any]:
        """
        Advance one tick.

        Returns:
            (next_state, observation, reward, done)
        """
        pass
