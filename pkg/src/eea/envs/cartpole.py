"""Classic cart-pole balancing with explicit Euler integration."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .base import Env

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = POLE_MASS * HALF_LENGTH
FORCE = 10.0
TAU = 0.02
ANGLE_LIMIT = 12 * 2 * math.pi / 360
POSITION_LIMIT = 2.4
MAX_STEPS = 200

LEFT, RIGHT = 0, 1


class CartpoleState(NamedTuple):
    position: float
    velocity: float
    angle: float
    angular_velocity: float


def accelerations(state, force: float):
    """Cart and pole accelerations (x'', theta'') for the frictionless system."""
    _, _, theta, theta_dot = state
    cos, sin = math.cos(theta), math.sin(theta)
    temp = (force + POLE_MASS_LENGTH * theta_dot**2 * sin) / TOTAL_MASS
    theta_acc = (GRAVITY * sin - cos * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos**2 / TOTAL_MASS)
    )
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS
    return x_acc, theta_acc


def out_of_bounds(state) -> bool:
    return abs(state[0]) > POSITION_LIMIT or abs(state[2]) > ANGLE_LIMIT


def cartpole_step(state, action: int):
    if action not in (LEFT, RIGHT):
        raise ValueError(f"invalid cartpole action {action!r}")
    x, x_dot, theta, theta_dot = state
    x_acc, theta_acc = accelerations(state, FORCE if action == RIGHT else -FORCE)
    nxt = CartpoleState(
        x + TAU * x_dot,
        x_dot + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    )
    return nxt, 1.0, out_of_bounds(nxt)


class CartpoleEnv(Env):
    action_count = 2
    observation_size = 4

    def __init__(self, max_steps: int = MAX_STEPS):
        super().__init__()
        self.max_steps = max_steps
        self.state = CartpoleState(0.0, 0.0, 0.0, 0.0)

    def _reset(self):
        self.state = CartpoleState(*self.rng.uniform(-0.05, 0.05, size=4))
        return np.array(self.state)

    def _step(self, action):
        self.state, reward, done = cartpole_step(self.state, action)
        return np.array(self.state), reward, done
