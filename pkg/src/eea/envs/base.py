from __future__ import annotations

from typing import Any, Optional

import numpy as np


class EpisodeOverError(RuntimeError):
    pass


class Env:
    """Minimal reset/step interface shared by all environments.

    ``step`` returns ``(observation, reward, done)``. ``truncated`` is set when
    an episode ended on the step cap rather than a true terminal state.
    """

    action_count: int
    max_steps: Optional[int] = None

    def __init__(self):
        self.rng = np.random.default_rng()
        self.done = True
        self.truncated = False
        self.t = 0

    def reset(self, seed=None) -> Any:
        if seed is not None or not hasattr(self, "_seeded"):
            self.rng = np.random.default_rng(seed)
            self._seeded = True
        self.done = False
        self.truncated = False
        self.t = 0
        return self._reset()

    def step(self, action: int):
        if self.done:
            raise EpisodeOverError("step() called on a finished episode; call reset()")
        if not 0 <= int(action) < self.action_count:
            raise ValueError(f"invalid action {action!r} for {self.action_count} actions")
        obs, reward, done = self._step(int(action))
        self.t += 1
        if not done and self.max_steps is not None and self.t >= self.max_steps:
            done = True
            self.truncated = True
        self.done = done
        return obs, reward, done

    def _reset(self):
        raise NotImplementedError

    def _step(self, action: int):
        raise NotImplementedError
