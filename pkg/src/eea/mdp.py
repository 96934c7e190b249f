"""Finite MDPs, exact dynamic programming and homomorphism checks.

Transition and reward tensors are dense ``[S, A, S]`` arrays. Rewards live on
``(s, a, s')`` triples so that reward dependence on the incoming action can be
audited rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

ROW_SUM_TOL = 1e-12
VI_MAX_ITERATIONS = 10**6


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TabularMDP:
    transition: np.ndarray  # [S, A, S]
    reward: np.ndarray  # [S, A, S]
    discount: float
    terminal: frozenset = frozenset()
    initial_state: int = 0

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape [S, A, S], got {P.shape}")
        if R.shape != P.shape:
            raise ValueError(f"reward shape {R.shape} != transition shape {P.shape}")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must lie in [0, 1], got {self.discount}")
        if np.any(P < 0) or np.any(P > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        bad = np.argwhere(np.abs(P.sum(axis=2) - 1.0) > ROW_SUM_TOL)
        if len(bad):
            s, a = bad[0]
            raise ValueError(f"transition row ({s}, {a}) sums to {P[s, a].sum()!r}")
        S = P.shape[0]
        terminal = frozenset(int(t) for t in self.terminal)
        for t in terminal:
            if not 0 <= t < S:
                raise ValueError(f"terminal state {t} out of range")
            if np.any(P[t, :, t] != 1.0) or np.any(R[t, :, :] != 0.0):
                raise ValueError(f"terminal state {t} must self-loop with zero reward")
        if not 0 <= self.initial_state < S:
            raise ValueError(f"initial state {self.initial_state} out of range")
        P.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "terminal", terminal)
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def state_count(self) -> int:
        return self.transition.shape[0]

    @property
    def action_count(self) -> int:
        return self.transition.shape[1]

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all(np.sum(self.transition == 1.0, axis=2) == 1))

    def successor(self, s: int, a: int) -> int:
        """Next state of a deterministic pair."""
        row = self.transition[s, a]
        (idx,) = np.nonzero(row == 1.0)
        if len(idx) != 1:
            raise ValueError(f"pair ({s}, {a}) is not deterministic")
        return int(idx[0])

    def permuted(self, perm) -> "TabularMDP":
        """Relabel states so that old state ``i`` becomes ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        P = self.transition[inv][:, :, inv]
        R = self.reward[inv][:, :, inv]
        return TabularMDP(
            P,
            R,
            self.discount,
            frozenset(int(perm[t]) for t in self.terminal),
            int(perm[self.initial_state]),
        )


@dataclass
class QTable:
    values: np.ndarray
    visit_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.visit_counts is None:
            self.visit_counts = np.zeros(self.values.shape, dtype=np.int64)

    @classmethod
    def zeros(cls, state_count: int, action_count: int) -> "QTable":
        return cls(
            np.zeros((state_count, action_count)),
            np.zeros((state_count, action_count), dtype=np.int64),
        )

    def greedy_policy(self) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the lowest action index
        return np.argmax(self.values, axis=1)


# -- dynamic programming -------------------------------------------------------


def _bellman(mdp: TabularMDP, q: np.ndarray, live: np.ndarray) -> np.ndarray:
    v = q.max(axis=1) * live
    return np.einsum("ijk,ijk->ij", mdp.transition, mdp.reward) + mdp.discount * (
        mdp.transition @ v
    )


def value_iteration(
    mdp: TabularMDP, tolerance: float = 1e-10, max_iterations: int = VI_MAX_ITERATIONS
) -> QTable:
    """Synchronous value iteration on Q.

    Stops when the max-norm Bellman residual drops below ``tolerance``.
    Terminal states are pinned to zero value.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    live = np.ones(mdp.state_count)
    live[list(mdp.terminal)] = 0.0
    q = np.zeros((mdp.state_count, mdp.action_count))
    residual = np.inf
    for _ in range(max_iterations):
        q_next = _bellman(mdp, q, live)
        residual = np.max(np.abs(q_next - q))
        q = q_next
        if residual < tolerance:
            break
    else:
        raise ConvergenceError(
            f"value iteration did not converge in {max_iterations} sweeps "
            f"(residual {residual:.3g}, discount {mdp.discount}, "
            f"{len(mdp.terminal)} terminal states)"
        )
    q[list(mdp.terminal)] = 0.0
    return QTable(q, np.zeros(q.shape, dtype=np.int64))


def greedy_rollout(mdp: TabularMDP, policy, start: Optional[int] = None, cap: int = 1000) -> Optional[int]:
    """Steps a deterministic policy needs to reach a terminal state, or None."""
    s = mdp.initial_state if start is None else start
    for steps in range(cap + 1):
        if s in mdp.terminal:
            return steps
        s = mdp.successor(s, int(policy[s]))
    return None


# -- homomorphism maps ---------------------------------------------------------

UNMAPPED = -1


class StatePredictor(Protocol):
    def predict(self, state: int, action: int) -> Optional[int]: ...


@dataclass
class HomomorphismMap:
    """Per-pair image ``(state_map[s, a], action_map[s, a])``.

    ``state_map`` holds ``UNMAPPED`` where no hypothetical state exists; those
    pairs keep their own action (``action_map[s, a] == a``).
    """

    state_map: np.ndarray
    action_map: np.ndarray
    hypothetical_action: Optional[int] = None  # None: general map, no EEA invariant

    def __post_init__(self):
        self.state_map = np.asarray(self.state_map, dtype=np.int64)
        self.action_map = np.asarray(self.action_map, dtype=np.int64)
        if self.state_map.shape != self.action_map.shape:
            raise ValueError("state_map and action_map shapes differ")
        mapped = self.state_map != UNMAPPED
        if self.hypothetical_action is not None and np.any(
            self.action_map[mapped] != self.hypothetical_action
        ):
            raise ValueError("mapped pairs must use the hypothetical action")

    @classmethod
    def identity(cls, state_count: int, action_count: int) -> "HomomorphismMap":
        s = np.repeat(np.arange(state_count)[:, None], action_count, axis=1)
        a = np.repeat(np.arange(action_count)[None, :], state_count, axis=0)
        return cls(s, a)

    @property
    def shape(self) -> tuple:
        return self.state_map.shape

    def image(self, s: int, a: int) -> Optional[tuple]:
        if self.state_map[s, a] == UNMAPPED:
            return None
        return int(self.state_map[s, a]), int(self.action_map[s, a])

    def mapped_pairs(self) -> list:
        return [tuple(map(int, p)) for p in np.argwhere(self.state_map != UNMAPPED)]

    def unmapped_pairs(self) -> list:
        return [tuple(map(int, p)) for p in np.argwhere(self.state_map == UNMAPPED)]

    def storage_slots(self, terminal=()) -> set:
        """Distinct Q-table entries an agent needs for all non-terminal pairs.

        Mapped pairs share the slot of their image; unmapped (border) pairs
        keep their own slot.
        """
        slots = set()
        S, A = self.shape
        for s in range(S):
            if s in terminal:
                continue
            for a in range(A):
                img = self.image(s, a)
                slots.add(img if img is not None else (s, a))
        return slots


def build_map(
    mdp: TabularMDP, fwd: StatePredictor, bwd: StatePredictor, a_hyp: int
) -> HomomorphismMap:
    """Map every pair onto ``(bwd(fwd(s, a), a_hyp), a_hyp)``.

    Pairs with ``a == a_hyp`` and pairs at terminal states map to themselves
    under ``a_hyp``. Pairs whose backward query is undefined are left unmapped.
    """
    S, A = mdp.state_count, mdp.action_count
    state_map = np.full((S, A), UNMAPPED, dtype=np.int64)
    action_map = np.tile(np.arange(A), (S, 1))
    for s in range(S):
        for a in range(A):
            if a == a_hyp or s in mdp.terminal:
                s_hyp = s
            else:
                nxt = fwd.predict(s, a)
                s_hyp = None if nxt is None else bwd.predict(nxt, a_hyp)
            if s_hyp is not None:
                state_map[s, a] = s_hyp
                action_map[s, a] = a_hyp
    return HomomorphismMap(state_map, action_map, a_hyp)


def reduced_from_map(mdp: TabularMDP, hmap: HomomorphismMap) -> TabularMDP:
    """Route every mapped pair's dynamics through its hypothetical pair.

    Unmapped pairs keep their own rows, which is the border fallback: those
    states retain their full action set.
    """
    if hmap.shape != (mdp.state_count, mdp.action_count):
        raise ValueError(f"map shape {hmap.shape} does not match MDP")
    P = mdp.transition.copy()
    R = mdp.reward.copy()
    for s, a in hmap.mapped_pairs():
        s_hyp, a_hyp = hmap.image(s, a)
        P[s, a] = mdp.transition[s_hyp, a_hyp]
        R[s, a] = mdp.reward[s_hyp, a_hyp]
    return TabularMDP(P, R, mdp.discount, mdp.terminal, mdp.initial_state)


def build_reduced_mdp(
    mdp: TabularMDP, fwd: StatePredictor, bwd: StatePredictor, a_hyp: int
) -> tuple:
    if not mdp.is_deterministic:
        raise ValueError("equivalent-effect reduction requires deterministic transitions")
    hmap = build_map(mdp, fwd, bwd, a_hyp)
    return reduced_from_map(mdp, hmap), hmap


# -- verification --------------------------------------------------------------


@dataclass
class HomomorphismReport:
    checked_pairs: int = 0
    passed_pairs: int = 0
    transition_violations: list = field(default_factory=list)
    reward_violations: list = field(default_factory=list)
    unmapped_pairs: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.transition_violations and not self.reward_violations

    def format(self) -> str:
        lines = [
            f"homomorphism: {self.passed_pairs}/{self.checked_pairs} mapped pairs pass, "
            f"{len(self.transition_violations)} transition violations, "
            f"{len(self.reward_violations)} reward violations, "
            f"{len(self.unmapped_pairs)} unmapped pairs"
        ]
        for s, a, detail in self.transition_violations[:10]:
            lines.append(f"  transition ({s}, {a}): {detail}")
        for s, a, s2, lhs, rhs in self.reward_violations[:10]:
            lines.append(f"  reward ({s}, {a}, {s2}): {lhs} != {rhs}")
        return "\n".join(lines)


def check_homomorphism(
    mdp: TabularMDP,
    reduced: TabularMDP,
    hmap: HomomorphismMap,
    blocks=None,
    atol: float = 0.0,
) -> HomomorphismReport:
    """Exhaustively check the transition and reward conditions on mapped pairs.

    ``blocks`` labels each state with its block; next-state probabilities are
    summed per block on both sides. The default puts every state in its own
    block, since the reduced MDP keeps the original state set. Deterministic
    rows make every comparison an exact 0/1 equality.
    """
    shape = (mdp.state_count, mdp.action_count)
    if hmap.shape != shape or reduced.transition.shape != mdp.transition.shape:
        raise ValueError(
            f"shape mismatch: mdp {shape}, map {hmap.shape}, "
            f"reduced {reduced.transition.shape[:2]}"
        )
    labels = np.arange(mdp.state_count) if blocks is None else np.asarray(blocks)
    n_blocks = int(labels.max()) + 1

    def block_sum(row):
        return np.bincount(labels, weights=row, minlength=n_blocks)

    report = HomomorphismReport()
    for s, a in np.ndindex(*shape):
        img = hmap.image(s, a)
        if img is None:
            report.unmapped_pairs.append((s, a))
            continue
        s_hyp, a_hyp = img
        report.checked_pairs += 1
        failed = False
        lhs = block_sum(reduced.transition[s_hyp, a_hyp])
        rhs = block_sum(mdp.transition[s, a])
        diff = np.abs(lhs - rhs)
        if np.any(diff > atol):
            b = int(np.argmax(diff))
            report.transition_violations.append(
                (s, a, f"block {b}: image ({s_hyp}, {a_hyp}) gives {lhs[b]}, pair gives {rhs[b]}")
            )
            failed = True
        support = np.nonzero((mdp.transition[s, a] > 0) | (reduced.transition[s_hyp, a_hyp] > 0))[0]
        for s2 in support:
            r_lhs = reduced.reward[s_hyp, a_hyp, s2]
            r_rhs = mdp.reward[s, a, s2]
            if abs(r_lhs - r_rhs) > atol:
                report.reward_violations.append((s, a, int(s2), float(r_lhs), float(r_rhs)))
                failed = True
        if not failed:
            report.passed_pairs += 1
    return report


def check_value_equivalence(
    mdp: TabularMDP, reduced: TabularMDP, hmap: HomomorphismMap, tolerance: float = 1e-10
) -> float:
    """Largest ``|Q*(s, a) - Q*_reduced(image(s, a))|`` over mapped pairs."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    q = value_iteration(mdp, tolerance / 10).values
    q_red = value_iteration(reduced, tolerance / 10).values
    gap = 0.0
    for s, a in hmap.mapped_pairs():
        s_hyp, a_hyp = hmap.image(s, a)
        gap = max(gap, abs(q[s, a] - q_red[s_hyp, a_hyp]))
    return float(gap)


@dataclass
class AssumptionAudit:
    determinism_violations: list = field(default_factory=list)
    missing_predecessor_pairs: list = field(default_factory=list)  # (s, a, s')
    reward_violations: list = field(default_factory=list)  # (s', {(s, a): r})

    @property
    def border_states(self) -> list:
        """Successor states that no hypothetical-action move can reach."""
        return sorted({s2 for _, _, s2 in self.missing_predecessor_pairs})

    def format(self) -> str:
        return (
            f"determinism violations: {len(self.determinism_violations)}\n"
            f"pairs without hypothetical predecessor: {len(self.missing_predecessor_pairs)} "
            f"(border states: {len(self.border_states)})\n"
            f"reward depends on incoming action at: {len(self.reward_violations)} states"
        )


def assumption_audit(
    mdp: TabularMDP, a_hyp: int, allow_self_predecessor: bool = False
) -> AssumptionAudit:
    """Audit determinism, hypothetical-predecessor existence and reward form.

    Only non-terminal pairs count as environment transitions. A blocked move
    that leaves ``s'`` in place counts as a predecessor of ``s'`` only when
    ``allow_self_predecessor`` is set.
    """
    P, R = mdp.transition, mdp.reward
    audit = AssumptionAudit()
    live = [s for s in range(mdp.state_count) if s not in mdp.terminal]
    for s in live:
        for a in range(mdp.action_count):
            if np.sum(P[s, a] > 0) != 1:
                audit.determinism_violations.append((s, a))

    live_arr = np.array(live, dtype=np.int64)
    for s in live:
        for a in range(mdp.action_count):
            if a == a_hyp:
                continue
            for s2 in np.nonzero(P[s, a] > 0)[0]:
                cands = live_arr if allow_self_predecessor else live_arr[live_arr != s2]
                if not np.any(P[cands, a_hyp, s2] == P[s, a, s2]):
                    audit.missing_predecessor_pairs.append((s, a, int(s2)))

    incoming: dict = {}
    for s in live:
        for a in range(mdp.action_count):
            for s2 in np.nonzero(P[s, a] > 0)[0]:
                incoming.setdefault(int(s2), {})[(s, a)] = float(R[s, a, s2])
    for s2 in sorted(incoming):
        if len(set(incoming[s2].values())) > 1:
            audit.reward_violations.append((s2, incoming[s2]))
    return audit


# -- text interchange ------------------------------------------------------------


def parse_mdp(text: str) -> TabularMDP:
    """Parse the line format ``s a s' prob reward`` with ``states``/``actions``/
    ``discount``/``terminal``/``initial`` headers; ``#`` starts a comment."""
    header: dict = {}
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0].lower()
        try:
            if key in ("states", "actions", "initial"):
                header[key] = int(tok[1])
            elif key == "discount":
                header[key] = float(tok[1])
            elif key == "terminal":
                header[key] = [int(t) for t in tok[1:]]
            elif len(tok) == 5:
                rows.append((int(tok[0]), int(tok[1]), int(tok[2]), float(tok[3]), float(tok[4])))
            else:
                raise ValueError("unrecognised line")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}: {exc}") from None
    for key in ("states", "actions", "discount"):
        if key not in header:
            raise ValueError(f"missing header '{key}'")
    S, A = header["states"], header["actions"]
    terminal = header.get("terminal", [])
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    for s, a, s2, p, r in rows:
        if not (0 <= s < S and 0 <= a < A and 0 <= s2 < S):
            raise ValueError(f"transition ({s}, {a}, {s2}) out of range")
        P[s, a, s2] += p
        R[s, a, s2] = r
    for t in terminal:
        if not P[t].any():
            P[t, :, t] = 1.0
    return TabularMDP(P, R, header["discount"], frozenset(terminal), header.get("initial", 0))


def format_mdp(mdp: TabularMDP) -> str:
    lines = [
        f"states {mdp.state_count}",
        f"actions {mdp.action_count}",
        f"discount {float(mdp.discount)!r}",
    ]
    if mdp.terminal:
        lines.append("terminal " + " ".join(str(t) for t in sorted(mdp.terminal)))
    lines.append(f"initial {mdp.initial_state}")
    for s in range(mdp.state_count):
        if s in mdp.terminal:
            continue
        for a in range(mdp.action_count):
            for s2 in np.nonzero(mdp.transition[s, a])[0]:
                lines.append(
                    f"{s} {a} {s2} {float(mdp.transition[s, a, s2])!r} {float(mdp.reward[s, a, s2])!r}"
                )
    return "\n".join(lines) + "\n"


def load_mdp(path) -> TabularMDP:
    return parse_mdp(Path(path).read_text(encoding="utf-8"))


def save_mdp(mdp: TabularMDP, path) -> None:
    Path(path).write_text(format_mdp(mdp), encoding="utf-8")
