import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eea.mdp import TabularMDP

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def grid_mdp(rows, cols, blocked, goal, discount=0.9, start=None):
    """Deterministic gridworld over free cells; actions up/down/left/right."""
    cells = [(r, c) for r in range(rows) for c in range(cols) if (r, c) not in blocked]
    index = {c: i for i, c in enumerate(cells)}
    S = len(cells)
    P = np.zeros((S, 4, S))
    R = np.zeros((S, 4, S))
    g = index[goal]
    for cell, s in index.items():
        for a, (dr, dc) in enumerate(((-1, 0), (1, 0), (0, -1), (0, 1))):
            if s == g:
                P[s, a, s] = 1.0
                continue
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt not in index:
                nxt = cell
            P[s, a, index[nxt]] = 1.0
            R[s, a, index[nxt]] = 1.0 if nxt == goal else 0.0
    start = index[start] if start is not None else (0 if g != 0 else 1)
    return TabularMDP(P, R, discount, frozenset([g]), start)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, collected by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
