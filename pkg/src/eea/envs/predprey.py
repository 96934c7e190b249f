"""Predator-prey on a 7x7 grid with a uniformly random prey."""

from __future__ import annotations

from itertools import product
from typing import NamedTuple

import numpy as np

from ..mdp import TabularMDP
from .base import Env

SIZE = 7
MAX_STEPS = 100
UP, DOWN, LEFT, RIGHT, STAY = range(5)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))


class PredPreyState(NamedTuple):
    agent_cell: tuple
    prey_cell: tuple


def move(cell, action: int, size: int = SIZE):
    dr, dc = MOVES[action]
    r, c = cell[0] + dr, cell[1] + dc
    if 0 <= r < size and 0 <= c < size:
        return (r, c)
    return tuple(cell)


def prey_options(cell, size: int = SIZE) -> list:
    """Cells the prey may occupy next: in-bounds neighbours and staying put."""
    opts = [cell]
    for a in range(4):
        nxt = move(cell, a, size)
        if nxt != tuple(cell):
            opts.append(nxt)
    return opts


def predprey_step(state, action: int, rng, size: int = SIZE):
    if not 0 <= action < 5:
        raise ValueError(f"invalid predator-prey action {action!r}")
    agent = move(state[0], action, size)
    opts = prey_options(tuple(state[1]), size)
    prey = opts[rng.integers(len(opts))]
    caught = agent == prey
    return PredPreyState(agent, prey), (1.0 if caught else 0.0), caught


def border_mask(size: int = SIZE) -> np.ndarray:
    m = np.zeros((size, size))
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = 1.0
    return m


def observe(state, size: int = SIZE) -> np.ndarray:
    """Flattened ``size x size x 3`` binary tensor: agent, prey, border channels."""
    grid = np.zeros((size, size, 3))
    grid[state[0][0], state[0][1], 0] = 1.0
    grid[state[1][0], state[1][1], 1] = 1.0
    grid[:, :, 2] = border_mask(size)
    return grid.ravel()


class PredPreyEnv(Env):
    action_count = 5

    def __init__(self, size: int = SIZE, max_steps: int = MAX_STEPS):
        super().__init__()
        self.size = size
        self.max_steps = max_steps
        self.observation_size = size * size * 3
        self.state = PredPreyState((0, 0), (size - 1, size - 1))

    def _reset(self):
        cells = self.rng.choice(self.size * self.size, size=2, replace=False)
        agent, prey = (tuple(map(int, divmod(int(c), self.size))) for c in cells)
        self.state = PredPreyState(agent, prey)
        return observe(self.state, self.size)

    def _step(self, action):
        self.state, reward, done = predprey_step(self.state, action, self.rng, self.size)
        return observe(self.state, self.size), reward, done


def predprey_mdp(size: int = 2, discount: float = 0.9) -> TabularMDP:
    """Tabular predator-prey: states are (agent, prey) pairs plus one absorbing catch state."""
    cells = list(product(range(size), repeat=2))
    pairs = [(a, p) for a in cells for p in cells if a != p]
    index = {pair: i for i, pair in enumerate(pairs)}
    caught = len(pairs)
    S = caught + 1
    P = np.zeros((S, 5, S))
    R = np.zeros((S, 5, S))
    P[caught, :, caught] = 1.0
    for (agent, prey), s in index.items():
        for a in range(5):
            nxt_agent = move(agent, a, size)
            opts = prey_options(prey, size)
            for nxt_prey in opts:
                if nxt_prey == nxt_agent:
                    P[s, a, caught] += 1.0 / len(opts)
                    R[s, a, caught] = 1.0
                else:
                    P[s, a, index[(nxt_agent, nxt_prey)]] += 1.0 / len(opts)
    return TabularMDP(P, R, discount, frozenset([caught]), 0)
