"""Dyna maze, cartpole and stochastic predator-prey behind one interface."""

from .base import Env, EpisodeOverError
from .cartpole import CartpoleEnv, CartpoleState, cartpole_step
from .maze import MazeEnv, maze_mdp, maze_step
from .predprey import PredPreyEnv, PredPreyState, predprey_mdp, predprey_step

__all__ = [
    "Env",
    "EpisodeOverError",
    "MazeEnv",
    "maze_mdp",
    "maze_step",
    "CartpoleEnv",
    "CartpoleState",
    "cartpole_step",
    "PredPreyEnv",
    "PredPreyState",
    "predprey_mdp",
    "predprey_step",
]


def make_env(name: str, **kwargs) -> Env:
    envs = {"maze": MazeEnv, "cartpole": CartpoleEnv, "predprey": PredPreyEnv}
    if name not in envs:
        raise ValueError(f"unknown environment {name!r}")
    return envs[name](**kwargs)
