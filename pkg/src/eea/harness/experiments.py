"""Multi-seed experiment orchestration.

Seed ``i`` of a run derives all of its randomness from
``SeedSequence([master_seed, i])``: the first spawned child seeds the
environment, the second the agent. Seeds run independently (optionally in
worker processes, each with single-threaded BLAS) and are merged in seed
order, so output does not depend on scheduling.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..agents import DQNAgent, TabularAgent, dqn_episode, q_learning_episode, q_planning_step
from ..agents.tabular import greedy_path_length
from ..envs import CartpoleEnv, MazeEnv, PredPreyEnv, maze_mdp
from ..models import (
    ConcatActionModel,
    PerActionModel,
    TransitionDataset,
    exact_models,
    load_model,
    save_model,
    train_backward,
    train_forward,
)
from .config import ConfigError, ExperimentConfig
from .records import RunRecord

log = logging.getLogger(__name__)

MAZE_EPISODE_CAP = 100_000


def seed_streams(master_seed: int, index: int):
    """(environment seed, agent generator) for seed ``index``."""
    env_ss, agent_ss = np.random.SeedSequence([master_seed, index]).spawn(2)
    return int(env_ss.generate_state(1)[0]), np.random.default_rng(agent_ss)


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t = time.perf_counter()

    def lap(self) -> float:
        if not self.enabled:
            return 0.0
        now = time.perf_counter()
        ms, self.t = 1000.0 * (now - self.t), now
        return ms


def _maze_q(cfg: ExperimentConfig, index: int) -> list:
    env_seed, rng = seed_streams(cfg.master_seed, index)
    agent_cfg = cfg.agent_config()
    mdp = maze_mdp(agent_cfg.discount)
    models = exact_models(mdp, cfg.allow_self_predecessor) if cfg.agent == "eea" else None
    agent = TabularAgent(mdp.state_count, mdp.action_count, agent_cfg, rng, models, cfg.hyp_action)
    env = MazeEnv()
    env.reset(env_seed)
    clock = _Clock(cfg.timing)
    out = []
    for ep in range(1, cfg.episodes + 1):
        steps, ret = q_learning_episode(agent, env, MAZE_EPISODE_CAP)
        out.append(RunRecord(cfg.experiment, cfg.agent, index, ep, steps, ret, clock.lap()))
    return out


def _maze_plan(cfg: ExperimentConfig, index: int) -> list:
    """Checkpoint ``k`` holds ``k * checkpoint_every`` backups as ``steps`` and
    the discounted return of the greedy policy from the start (0 if it never
    reaches the goal) as ``return``."""
    _, rng = seed_streams(cfg.master_seed, index)
    agent_cfg = cfg.agent_config()
    mdp = maze_mdp(agent_cfg.discount)
    models = exact_models(mdp, cfg.allow_self_predecessor) if cfg.agent == "eea" else None
    agent = TabularAgent(mdp.state_count, mdp.action_count, agent_cfg, rng, models, cfg.hyp_action)
    clock = _Clock(cfg.timing)
    out = []
    for k in range(1, cfg.episodes + 1):
        for _ in range(cfg.checkpoint_every):
            q_planning_step(agent, mdp, rng)
        n = greedy_path_length(agent, mdp, cap=mdp.state_count * 4)
        ret = 0.0 if n is None else agent_cfg.discount ** (n - 1)
        out.append(RunRecord(cfg.experiment, cfg.agent, index, k, k * cfg.checkpoint_every, ret, clock.lap()))
    return out


def fit_cartpole_models(data: TransitionDataset, cfg: ExperimentConfig, rng):
    """Per-action linear forward and backward models, full-batch Adam.

    The last fifth of the epochs runs at a tenth of the step size; at constant
    step size Adam keeps bouncing around the least-squares floor.
    """
    fwd = PerActionModel.linear(4, 2, rng)
    bwd = PerActionModel.linear(4, 2, rng)
    tail = cfg.model_epochs // 5
    for train in (train_forward, train_backward):
        model = fwd if train is train_forward else bwd
        train(model, data, "adam", cfg.model_epochs - tail, cfg.model_lr, rng=rng)
        train(model, data, "adam", tail, cfg.model_lr / 10, rng=rng)
    return fwd, bwd


def _cartpole(cfg: ExperimentConfig, index: int) -> list:
    env_seed, rng = seed_streams(cfg.master_seed, index)
    agent_cfg = cfg.agent_config()
    eea = cfg.agent == "eea"
    agent = DQNAgent(4, 2, agent_cfg, rng, eea=eea, a_hyp=cfg.hyp_action if eea else None)
    env = CartpoleEnv()
    env.reset(env_seed)
    data = TransitionDataset()
    clock = _Clock(cfg.timing)
    out = []
    for ep in range(1, cfg.episodes + 1):
        agent.start_episode(ep - 1)
        collecting = eea and ep <= cfg.model_episodes
        steps, ret = dqn_episode(agent, env, data if collecting else None, random_policy=collecting)
        if eea and ep == cfg.model_episodes:
            agent.set_models(*fit_cartpole_models(data, cfg, rng))
        out.append(RunRecord(cfg.experiment, cfg.agent, index, ep, steps, ret, clock.lap()))
    return out


def collect_random_transitions(env, steps: int, rng) -> TransitionDataset:
    data = TransitionDataset()
    obs = env.reset()
    for _ in range(steps):
        a = int(rng.integers(env.action_count))
        nxt, _, done = env.step(a)
        data.add(obs, a, nxt)
        obs = env.reset() if done else nxt
    return data


def pretrain_predprey_models(cfg: ExperimentConfig, directory) -> tuple:
    """Fit forward/backward networks on random-action experience and save them."""
    env_seed, rng = seed_streams(cfg.master_seed, -1 % 2**32)
    env = PredPreyEnv()
    env.reset(env_seed)
    data = collect_random_transitions(env, cfg.pretrain_steps, rng)
    obs_size = env.observation_size
    fwd = ConcatActionModel.build(obs_size, env.action_count, hidden=cfg.pretrain_hidden, rng=rng)
    bwd = ConcatActionModel.build(obs_size, env.action_count, hidden=cfg.pretrain_hidden, rng=rng)
    with threadpool_limits(1):
        cf = train_forward(fwd, data, "adam", cfg.pretrain_epochs, cfg.pretrain_lr, batch_size=64, rng=rng)
        cb = train_backward(bwd, data, "adam", cfg.pretrain_epochs, cfg.pretrain_lr, batch_size=64, rng=rng)
    budget = {
        "random_steps": cfg.pretrain_steps,
        "epochs": cfg.pretrain_epochs,
        "learning_rate": cfg.pretrain_lr,
        "hidden": list(cfg.pretrain_hidden),
        "master_seed": cfg.master_seed,
        "final_mse": cf[-1] if cf else None,
    }
    save_model(fwd, directory, "forward", "predprey", budget)
    save_model(bwd, directory, "backward", "predprey", {**budget, "final_mse": cb[-1] if cb else None})
    log.info("predator-prey models saved to %s (forward mse %.4g, backward mse %.4g)",
             directory, cf[-1] if cf else float("nan"), cb[-1] if cb else float("nan"))
    return fwd, bwd


def predprey_models_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.models_dir) if cfg.models_dir else Path("results") / "models" / "predprey"


def ensure_predprey_models(cfg: ExperimentConfig) -> Path:
    directory = predprey_models_dir(cfg)
    if not (directory / "forward.json").exists() or not (directory / "backward.json").exists():
        pretrain_predprey_models(cfg, directory)
    return directory


def _predprey(cfg: ExperimentConfig, index: int) -> list:
    env_seed, rng = seed_streams(cfg.master_seed, index)
    agent_cfg = cfg.agent_config()
    env = PredPreyEnv()
    env.reset(env_seed)
    eea = cfg.agent == "eea"
    models = None
    if eea:
        directory = predprey_models_dir(cfg)
        models = (load_model(directory, "forward")[0], load_model(directory, "backward")[0])
    agent = DQNAgent(env.observation_size, env.action_count, agent_cfg, rng, eea=eea,
                     a_hyp=cfg.hyp_action if eea else None, models=models)
    clock = _Clock(cfg.timing)
    out = []
    for ep in range(1, cfg.episodes + 1):
        agent.start_episode(ep - 1)
        steps, ret = dqn_episode(agent, env)
        out.append(RunRecord(cfg.experiment, cfg.agent, index, ep, steps, ret, clock.lap()))
    return out


RUNNERS = {"maze-q": _maze_q, "maze-plan": _maze_plan, "cartpole": _cartpole, "predprey": _predprey}


def run_seed(cfg: ExperimentConfig, index: int) -> list:
    with threadpool_limits(1):
        return RUNNERS[cfg.experiment](cfg, index)


def _run_seed_args(args):
    return run_seed(*args)


def run_experiment(cfg: ExperimentConfig) -> list:
    if cfg.experiment not in RUNNERS:
        raise ConfigError(f"experiment {cfg.experiment!r} has no episode runner")
    cfg.agent_config()  # surface configuration errors before any run
    if cfg.experiment == "predprey" and cfg.agent == "eea":
        ensure_predprey_models(cfg)
    jobs = [(cfg, i) for i in range(cfg.seeds)]
    if cfg.workers > 1 and cfg.seeds > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_seed = list(pool.map(_run_seed_args, jobs))
    else:
        per_seed = [run_seed(*job) for job in jobs]
    return [r for recs in per_seed for r in recs]
