"""Tabular Q-learning and random-sample one-step Q-planning, vanilla and EEA.

The EEA agent stores its values in the same ``[S, A]`` table as the vanilla
agent but only ever touches column ``a_hyp`` for mapped pairs; the remaining
columns serve as the border fallback for pairs without a hypothetical state.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..mdp import QTable, TabularMDP
from ..models import hypothetical_state
from .config import AgentConfig


def eea_q_values(state, q, fwd, bwd, a_hyp: int, action_count: int, border=None) -> np.ndarray:
    """Q-values for every action read through the hypothetical action.

    ``q(s)`` returns the value of ``(s, a_hyp)``. When a hypothetical state does
    not exist the value comes from ``border(state, a)`` instead.
    """
    out = np.empty(action_count)
    for a in range(action_count):
        if a == a_hyp:
            out[a] = q(state)
            continue
        s_hyp = hypothetical_state(fwd, bwd, state, a, a_hyp)
        if s_hyp is None:
            if border is None:
                raise ValueError(f"no hypothetical state for ({state}, {a}) and no fallback")
            out[a] = border(state, a)
        else:
            out[a] = q(s_hyp)
    return out


class TabularAgent:
    def __init__(
        self,
        state_count: int,
        action_count: int,
        config: AgentConfig,
        rng=None,
        models: Optional[tuple] = None,
        a_hyp: Optional[int] = None,
    ):
        self.config = config
        self.table = QTable.zeros(state_count, action_count)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.action_count = action_count
        self.eea = models is not None
        if self.eea:
            if a_hyp is None:
                raise ValueError("an EEA agent needs a hypothetical action")
            self.fwd, self.bwd = models
            self.a_hyp = a_hyp
            # slot[s, a] is the table cell that stores Q(s, a)
            self.slot = np.empty((state_count, action_count, 2), dtype=np.int64)
            for s in range(state_count):
                for a in range(action_count):
                    s_hyp = hypothetical_state(self.fwd, self.bwd, s, a, a_hyp)
                    self.slot[s, a] = (s, a) if s_hyp is None else (s_hyp, a_hyp)

    def q_values(self, s: int) -> np.ndarray:
        v = self.table.values
        if not self.eea:
            return v[s]
        return eea_q_values(
            s,
            lambda x: v[x, self.a_hyp],
            self.fwd,
            self.bwd,
            self.a_hyp,
            self.action_count,
            border=lambda x, a: v[x, a],
        )

    def storage_index(self, s: int, a: int) -> tuple:
        if not self.eea:
            return s, a
        return tuple(self.slot[s, a])

    def act(self, s: int, epsilon: Optional[float] = None) -> int:
        """Epsilon-greedy. While exploring (epsilon > 0) ties among greedy actions
        are broken at random; with epsilon = 0 this is ``greedy``."""
        eps = self.config.epsilon if epsilon is None else epsilon
        if eps == 0:
            return self.greedy(s)
        if self.rng.random() < eps:
            return int(self.rng.integers(self.action_count))
        q = self.q_values(s)
        best = np.flatnonzero(q == q.max())
        return int(best[0]) if len(best) == 1 else int(self.rng.choice(best))

    def greedy(self, s: int) -> int:
        return int(np.argmax(self.q_values(s)))

    def reduced_q_values(self, s: int) -> np.ndarray:
        """Q-values read straight from the reduced-table slots of ``s``."""
        if not self.eea:
            return self.table.values[s]
        idx = self.slot[s]
        return self.table.values[idx[:, 0], idx[:, 1]]

    def update(self, s: int, a: int, r: float, s2: int, terminal: bool) -> None:
        if terminal:
            target = r
        else:
            read = self.reduced_q_values if self.config.bootstrap == "reduced" else self.q_values
            target = r + self.config.discount * float(np.max(read(s2)))
        idx = self.storage_index(s, a)
        v = self.table.values
        v[idx] += self.config.learning_rate * (target - v[idx])
        self.table.visit_counts[idx] += 1


def q_learning_episode(agent: TabularAgent, env, max_steps: int = 100_000) -> tuple:
    """One epsilon-greedy episode with online updates; returns (length, return)."""
    s = env.reset()
    total, steps = 0.0, 0
    done = False
    while not done and steps < max_steps:
        a = agent.act(s)
        s2, r, done = env.step(a)
        agent.update(s, a, r, s2, done and not env.truncated)
        total += r
        steps += 1
        s = s2
    return steps, total


def q_planning_step(agent: TabularAgent, mdp: TabularMDP, rng=None) -> QTable:
    """Back up one uniformly sampled non-terminal pair using the known model."""
    rng = rng if rng is not None else agent.rng
    cache = getattr(agent, "_planning_cache", None)
    if cache is None or cache[0] is not mdp:
        live = [(s, a) for s in range(mdp.state_count) if s not in mdp.terminal
                for a in range(mdp.action_count)]
        cache = agent._planning_cache = (mdp, live, mdp.is_deterministic)
    _, live, deterministic = cache
    s, a = live[int(rng.integers(len(live)))]
    row = mdp.transition[s, a]
    s2 = int(np.argmax(row)) if deterministic else int(rng.choice(mdp.state_count, p=row))
    agent.update(s, a, float(mdp.reward[s, a, s2]), s2, s2 in mdp.terminal)
    return agent.table


def greedy_path_length(agent: TabularAgent, mdp: TabularMDP, cap: int = 200) -> Optional[int]:
    """Steps the greedy policy (lowest-index ties) needs from the start, or None."""
    s = mdp.initial_state
    for steps in range(cap + 1):
        if s in mdp.terminal:
            return steps
        s = mdp.successor(s, agent.greedy(s))
    return None


def episodes_to_optimal(lengths, optimal: int) -> Optional[int]:
    """1-based index of the first episode whose length equals ``optimal``."""
    for i, n in enumerate(lengths, start=1):
        if n == optimal:
            return i
    return None
