"""DQN with experience replay and a target network, plus its EEA variant.

The EEA variant's network has a single output head for the hypothetical
action. Every Q read, for acting and for TD targets, maps each action onto a
hypothetical state with the forward/backward models first.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..models import hypothetical_states
from ..nn import DenseNet, make_optimizer
from .config import AgentConfig


class ReplayBuffer:
    def __init__(self, capacity: int, obs_size: int, rng=None):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_size))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_size))
        self.dones = np.zeros(capacity)
        self.ptr = 0
        self.size = 0
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def __len__(self):
        return self.size

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self.ptr
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        return self.rng.integers(self.size, size=batch_size)

    def take(self, idx):
        return self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx], self.dones[idx]

    def sample(self, batch_size: int):
        return self.take(self.sample_indices(batch_size))


class DQNAgent:
    def __init__(
        self,
        obs_size: int,
        action_count: int,
        config: AgentConfig,
        rng=None,
        eea: bool = False,
        a_hyp: Optional[int] = None,
        models: Optional[tuple] = None,
    ):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.action_count = action_count
        self.eea = eea
        if eea and a_hyp is None:
            raise ValueError("an EEA agent needs a hypothetical action")
        self.a_hyp = a_hyp
        self.fwd = self.bwd = None
        heads = 1 if eea else action_count
        sizes = [obs_size, *config.hidden, heads]
        self.q_net = DenseNet(sizes, config.activation, rng=self.rng)
        self.target_net = self.q_net.copy()
        self.optimizer = make_optimizer(config.optimizer, self.q_net.parameter_count, config.learning_rate)
        self.replay = ReplayBuffer(config.replay_capacity, obs_size, self.rng)
        # frozen models make every stored transition's hypothetical states
        # fixed, so they are computed once per transition instead of per update
        self.mapped_obs = self.mapped_next = None
        if eea:
            self.mapped_obs = np.zeros((config.replay_capacity, obs_size))
            self.mapped_next = np.zeros((config.replay_capacity, action_count, obs_size))
        self.updates = 0
        self.episode = 0
        if models is not None:
            self.set_models(*models)

    def set_models(self, fwd, bwd) -> None:
        """Attach frozen dynamics models; they are not trained further."""
        self.fwd, self.bwd = fwd, bwd
        if self.mapped_obs is not None and len(self.replay):
            self._cache(np.arange(len(self.replay)))

    def _cache(self, idx) -> None:
        r = self.replay
        self.mapped_obs[idx] = self._mapped(r.obs[idx], r.actions[idx])
        self.mapped_next[idx] = self._candidates(r.next_obs[idx]).reshape(len(idx), self.action_count, -1)

    @property
    def ready(self) -> bool:
        return not self.eea or self.fwd is not None

    def start_episode(self, episode: int) -> None:
        self.episode = episode
        lr = self.config.learning_rate
        if self.config.lr_decay_episode is not None and episode >= self.config.lr_decay_episode:
            lr /= 10.0
        self.optimizer.step_size = lr

    @property
    def epsilon(self) -> float:
        eps = self.config.epsilon
        if self.config.epsilon_decay:
            eps *= math.exp(-self.episode / self.config.epsilon_decay)
        return eps

    # -- value reads -------------------------------------------------------------

    def _mapped(self, obs, actions):
        return hypothetical_states(self.fwd, self.bwd, obs, actions, self.a_hyp)

    def _candidates(self, obs: np.ndarray) -> np.ndarray:
        """``[B * A, obs]`` hypothetical states of every action, row-major by observation."""
        A = self.action_count
        return self._mapped(np.repeat(obs, A, axis=0), np.tile(np.arange(A), len(obs)))

    def _all_actions(self, net: DenseNet, obs: np.ndarray) -> np.ndarray:
        """``[B, A]`` values of every action for a batch of observations."""
        if not self.eea:
            return net.forward(obs)
        return net.forward(self._candidates(obs))[:, 0].reshape(len(obs), self.action_count)

    def q_values(self, obs) -> np.ndarray:
        return self._all_actions(self.q_net, np.asarray(obs, dtype=float)[None, :])[0]

    def act(self, obs) -> int:
        if not self.ready or self.rng.random() < self.epsilon:
            return int(self.rng.integers(self.action_count))
        return int(np.argmax(self.q_values(obs)))

    def td_targets(self, rewards, next_obs, dones) -> np.ndarray:
        nxt = self._all_actions(self.target_net, next_obs).max(axis=1)
        return rewards + self.config.discount * (1.0 - dones) * nxt

    # -- learning ----------------------------------------------------------------

    def dqn_step(self, batch, mapped=None) -> float:
        """One regression step toward the TD targets; returns the pre-update loss.

        ``mapped`` optionally supplies the EEA agent's precomputed hypothetical
        states: ``[B, obs]`` for the taken actions and ``[B, A, obs]`` for every
        action at the next observation.
        """
        obs, actions, rewards, next_obs, dones = batch
        B = len(obs)
        if self.eea and mapped is not None:
            x, nxt = mapped
            nxt_q = self.target_net.forward(nxt.reshape(B * self.action_count, -1))[:, 0]
            y = rewards + self.config.discount * (1.0 - dones) * nxt_q.reshape(B, -1).max(axis=1)
        else:
            y = self.td_targets(rewards, next_obs, dones)
        if self.eea:
            if mapped is None:
                x = self._mapped(obs, actions)
            q = self.q_net.forward(x)
            cols = np.zeros(B, dtype=np.int64)
        else:
            x = obs
            q = self.q_net.forward(x)
            cols = actions
        pred = q[np.arange(B), cols]
        resid = pred - y
        delta = self.config.huber_delta
        if delta is None:
            dloss = resid
            loss = 0.5 * float(np.mean(resid * resid))
        else:
            dloss = np.clip(resid, -delta, delta)
            small = np.abs(resid) <= delta
            loss = float(np.mean(np.where(small, 0.5 * resid * resid, delta * (np.abs(resid) - 0.5 * delta))))
        grad_out = np.zeros_like(q)
        grad_out[np.arange(B), cols] = dloss / B
        grads = self.q_net.backward(x, grad_out)
        clip = self.config.clip_grad_norm
        if clip is not None:
            norm = float(np.linalg.norm(grads))
            if norm > clip:
                grads = grads * (clip / norm)
        self.optimizer.step(self.q_net.params, grads)
        self.updates += 1
        if self.updates % self.config.target_sync == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.target_net.params[:] = self.q_net.params

    def observe(self, obs, action, reward, next_obs, terminal) -> Optional[float]:
        slot = self.replay.ptr
        self.replay.push(obs, action, reward, next_obs, terminal)
        if not self.ready:
            return None
        if self.eea:
            self._cache(np.array([slot]))
        if len(self.replay) < max(self.config.batch_size, self.config.train_start):
            return None
        loss = None
        for _ in range(self.config.updates_per_step):
            idx = self.replay.sample_indices(self.config.batch_size)
            mapped = (self.mapped_obs[idx], self.mapped_next[idx]) if self.eea else None
            loss = self.dqn_step(self.replay.take(idx), mapped)
        return loss


def dqn_episode(agent: DQNAgent, env, dataset=None, random_policy: bool = False) -> tuple:
    """Run one episode, learning online; returns (steps, return)."""
    obs = env.reset()
    total, steps, done = 0.0, 0, False
    while not done:
        if random_policy:
            a = int(agent.rng.integers(agent.action_count))
        else:
            a = agent.act(obs)
        nxt, r, done = env.step(a)
        if dataset is not None:
            dataset.add(obs, a, nxt)
        agent.observe(obs, a, r, nxt, done and not env.truncated)
        total += r
        steps += 1
        obs = nxt
    return steps, total
