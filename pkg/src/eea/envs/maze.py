"""The 6x9 Dyna maze: start on the west wall, goal in the north-east corner."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..mdp import TabularMDP
from .base import Env

ROWS, COLS = 6, 9
START = (2, 0)
GOAL = (0, 8)
OBSTACLES = frozenset([(1, 2), (2, 2), (3, 2), (4, 5), (0, 7), (1, 7), (2, 7)])

UP, DOWN, LEFT, RIGHT = range(4)
ACTION_NAMES = ("up", "down", "left", "right")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

CELLS = [(r, c) for r in range(ROWS) for c in range(COLS) if (r, c) not in OBSTACLES]
CELL_INDEX = {cell: i for i, cell in enumerate(CELLS)}


class MazeState(NamedTuple):
    row: int
    col: int


def free(cell) -> bool:
    r, c = cell
    return 0 <= r < ROWS and 0 <= c < COLS and (r, c) not in OBSTACLES


def maze_step(state, action: int):
    """One move; walls and obstacles leave the agent in place."""
    if not 0 <= action < 4:
        raise ValueError(f"invalid maze action {action!r}")
    dr, dc = MOVES[action]
    nxt = (state[0] + dr, state[1] + dc)
    if not free(nxt):
        nxt = tuple(state)
    nxt = MazeState(*nxt)
    at_goal = nxt == GOAL
    return nxt, (1.0 if at_goal else 0.0), at_goal


class MazeEnv(Env):
    action_count = 4
    state_count = len(CELLS)

    def __init__(self, max_steps=None):
        super().__init__()
        self.max_steps = max_steps
        self.state = MazeState(*START)

    def _reset(self):
        self.state = MazeState(*START)
        return CELL_INDEX[self.state]

    def _step(self, action):
        self.state, reward, done = maze_step(self.state, action)
        return CELL_INDEX[self.state], reward, done

    @staticmethod
    def one_hot(index: int) -> np.ndarray:
        v = np.zeros(len(CELLS))
        v[index] = 1.0
        return v


def maze_mdp(discount: float = 0.95) -> TabularMDP:
    """Exhaustive tabularization of ``maze_step`` over the free cells."""
    S = len(CELLS)
    P = np.zeros((S, 4, S))
    R = np.zeros((S, 4, S))
    goal = CELL_INDEX[GOAL]
    for s, cell in enumerate(CELLS):
        for a in range(4):
            if s == goal:
                P[s, a, s] = 1.0
                continue
            nxt, reward, _ = maze_step(MazeState(*cell), a)
            P[s, a, CELL_INDEX[nxt]] = 1.0
            R[s, a, CELL_INDEX[nxt]] = reward
    return TabularMDP(P, R, discount, frozenset([goal]), CELL_INDEX[START])
