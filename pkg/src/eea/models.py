"""Forward and backward transition predictors.

Exact models answer queries on tabular MDPs by lookup; learned models regress
observation vectors with dense networks. Both expose ``predict(x, action)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .mdp import TabularMDP
from .nn import DenseNet, LinearModel, fit, make_optimizer


class NonInvertibleError(ValueError):
    pass


def exact_backward_lookup(
    mdp: TabularMDP, next_state: int, action: int, allow_self_predecessor: bool = False
) -> Optional[int]:
    """The non-terminal state that ``action`` moves into ``next_state``.

    A predecessor distinct from ``next_state`` is preferred. A blocked move that
    leaves the agent on ``next_state`` only qualifies when
    ``allow_self_predecessor`` is set. Terminal states never qualify: their
    self-loops are bookkeeping, not environment transitions.
    """
    if not mdp.is_deterministic:
        raise ValueError("exact backward lookup requires deterministic transitions")
    preds = np.nonzero(mdp.transition[:, action, next_state] == 1.0)[0]
    preds = [int(p) for p in preds if p not in mdp.terminal]
    distinct = [p for p in preds if p != next_state]
    if len(distinct) > 1:
        raise NonInvertibleError(
            f"action {action} reaches state {next_state} from several states {distinct}"
        )
    if distinct:
        return distinct[0]
    if allow_self_predecessor and next_state in preds:
        return next_state
    return None


class ExactForward:
    def __init__(self, mdp: TabularMDP):
        if not mdp.is_deterministic:
            raise ValueError("exact forward model requires deterministic transitions")
        self.table = np.argmax(mdp.transition, axis=2)

    def predict(self, state: int, action: int) -> Optional[int]:
        return int(self.table[state, action])


class ExactBackward:
    """Backward lookups, precomputed for every ``(next_state, action)``."""

    def __init__(self, mdp: TabularMDP, allow_self_predecessor: bool = False):
        S, A = mdp.state_count, mdp.action_count
        self.table = np.full((S, A), -1, dtype=np.int64)
        for s2 in range(S):
            for a in range(A):
                p = exact_backward_lookup(mdp, s2, a, allow_self_predecessor)
                if p is not None:
                    self.table[s2, a] = p

    def predict(self, next_state: int, action: int) -> Optional[int]:
        p = self.table[next_state, action]
        return None if p < 0 else int(p)


def exact_models(mdp: TabularMDP, allow_self_predecessor: bool = False):
    return ExactForward(mdp), ExactBackward(mdp, allow_self_predecessor)


def hypothetical_state(fwd, bwd, s, a: int, a_hyp: int):
    """``bwd(fwd(s, a), a_hyp)``; the hypothetical action maps to ``s`` itself.

    Exact models return None when the backward query has no answer.
    """
    if a == a_hyp:
        return s
    nxt = fwd.predict(s, a)
    if nxt is None:
        return None
    return bwd.predict(nxt, a_hyp)


def hypothetical_states(fwd, bwd, obs: np.ndarray, actions: np.ndarray, a_hyp: int) -> np.ndarray:
    """Batched ``hypothetical_state`` for learned models over observation rows."""
    obs = np.asarray(obs, dtype=float)
    actions = np.asarray(actions)
    out = obs.copy()
    move = actions != a_hyp
    if np.any(move):
        nxt = fwd.predict(obs[move], actions[move])
        out[move] = bwd.predict(nxt, np.full(int(move.sum()), a_hyp))
    return out


# -- learned models ------------------------------------------------------------


@dataclass
class TransitionDataset:
    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    next_observations: list = field(default_factory=list)

    def add(self, obs, action, next_obs) -> None:
        obs = np.asarray(obs, dtype=float)
        next_obs = np.asarray(next_obs, dtype=float)
        if self.observations and (
            obs.shape != self.observations[0].shape or next_obs.shape != obs.shape
        ):
            raise ValueError("observation shapes must be homogeneous")
        self.observations.append(obs)
        self.actions.append(int(action))
        self.next_observations.append(next_obs)

    def __len__(self):
        return len(self.actions)

    def arrays(self):
        return (
            np.array(self.observations),
            np.array(self.actions, dtype=np.int64),
            np.array(self.next_observations),
        )


class PerActionModel:
    """One network per action, e.g. one linear model for each cartpole push."""

    conditioning = "per-action"

    def __init__(self, nets: list):
        self.nets = nets

    @classmethod
    def linear(cls, obs_size: int, action_count: int, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        return cls([LinearModel(obs_size, obs_size, rng) for _ in range(action_count)])

    @property
    def action_count(self) -> int:
        return len(self.nets)

    def predict(self, x, action):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.nets[int(action)].forward(x)
        action = np.broadcast_to(np.asarray(action), (len(x),))
        out = np.empty_like(x)
        for a in np.unique(action):
            rows = action == a
            out[rows] = self.nets[int(a)].forward(x[rows])
        return out

    def train(self, inputs, actions, targets, optimizer, step_size, epochs, batch_size, rng):
        curves = []
        for a, net in enumerate(self.nets):
            rows = actions == a
            if not np.any(rows):
                curves.append([np.nan] * epochs)
                continue
            opt = make_optimizer(optimizer, net.parameter_count, step_size)
            curves.append(fit(net, inputs[rows], targets[rows], opt, epochs, batch_size, rng))
        if not epochs:
            return []
        weights = np.array([np.sum(actions == a) for a in range(len(self.nets))], dtype=float)
        curves = np.nan_to_num(np.array(curves))
        return list(weights @ curves / weights.sum())


class ConcatActionModel:
    """A single network on the observation concatenated with a one-hot action."""

    conditioning = "one-hot"

    def __init__(self, net: DenseNet, action_count: int):
        self.net = net
        self.action_count = action_count

    @classmethod
    def build(cls, obs_size, action_count, hidden=(512, 8, 512), activation="relu", rng=None):
        sizes = [obs_size + action_count, *hidden, obs_size]
        return cls(DenseNet(sizes, activation, rng=rng), action_count)

    def _inputs(self, x, action):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        action = np.broadcast_to(np.asarray(action), (len(x2),))
        onehot = np.zeros((len(x2), self.action_count))
        onehot[np.arange(len(x2)), action] = 1.0
        return np.hstack([x2, onehot]), single

    def predict(self, x, action):
        inp, single = self._inputs(x, action)
        out = self.net.forward(inp)
        return out[0] if single else out

    def train(self, inputs, actions, targets, optimizer, step_size, epochs, batch_size, rng):
        inp, _ = self._inputs(inputs, actions)
        opt = make_optimizer(optimizer, self.net.parameter_count, step_size)
        return fit(self.net, inp, targets, opt, epochs, batch_size, rng)


def _train(model, inputs, actions, targets, optimizer, step_size, epochs, batch_size, rng):
    if len(actions) == 0:
        raise ValueError("cannot train a dynamics model on an empty dataset")
    rng = rng if rng is not None else np.random.default_rng(0)
    return model.train(inputs, actions, targets, optimizer, step_size, epochs, batch_size, rng)


def train_forward(
    model, data: TransitionDataset, optimizer="adam", epochs=100, step_size=1e-3, batch_size=None, rng=None
) -> list:
    """Fit ``model(s_t, a_t) ~ s_{t+1}``; returns the MSE after each epoch."""
    if len(data) == 0:
        raise ValueError("cannot train a dynamics model on an empty dataset")
    obs, actions, nxt = data.arrays()
    return _train(model, obs, actions, nxt, optimizer, step_size, epochs, batch_size, rng)


def train_backward(
    model, data: TransitionDataset, optimizer="adam", epochs=100, step_size=1e-3, batch_size=None, rng=None
) -> list:
    """Fit ``model(s_{t+1}, a_t) ~ s_t``; returns the MSE after each epoch."""
    if len(data) == 0:
        raise ValueError("cannot train a dynamics model on an empty dataset")
    obs, actions, nxt = data.arrays()
    return _train(model, nxt, actions, obs, optimizer, step_size, epochs, batch_size, rng)


# -- persistence ---------------------------------------------------------------


def save_model(model, directory, role: str, environment: str, budget: dict) -> Path:
    """Write network snapshots plus a ``<role>.json`` manifest into ``directory``."""
    if role not in ("forward", "backward"):
        raise ValueError(f"role must be 'forward' or 'backward', got {role!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nets = model.nets if isinstance(model, PerActionModel) else [model.net]
    files = []
    for i, net in enumerate(nets):
        name = f"{role}-{i}.params"
        net.save(directory / name)
        files.append(name)
    manifest = {
        "environment": environment,
        "role": role,
        "action_conditioning": model.conditioning,
        "action_count": model.action_count,
        "training_budget": budget,
        "files": files,
    }
    path = directory / f"{role}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_model(directory, role: str):
    directory = Path(directory)
    manifest_path = directory / f"{role}.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"no {role} model manifest at {manifest_path}") from None
    nets = [DenseNet.load(directory / f) for f in manifest["files"]]
    if manifest["action_conditioning"] == "per-action":
        model = PerActionModel(nets)
    else:
        model = ConcatActionModel(nets[0], manifest["action_count"])
    return model, manifest
