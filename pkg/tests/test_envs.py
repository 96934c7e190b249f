import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import grid_mdp
from eea.envs import CartpoleEnv, EpisodeOverError, MazeEnv, PredPreyEnv, make_env, maze_mdp
from eea.envs import cartpole as cp
from eea.envs import maze
from eea.envs import predprey as pp

# chi-square critical value for 4 degrees of freedom at p = 0.001
CHI2_4DF_999 = 18.467


# -- maze -------------------------------------------------------------------------


def bfs_actions(start, goal):
    prev = {start: None}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            break
        for a, (dr, dc) in enumerate(maze.MOVES):
            nxt = (cell[0] + dr, cell[1] + dc)
            if maze.free(nxt) and nxt not in prev:
                prev[nxt] = (cell, a)
                queue.append(nxt)
    actions = []
    cell = goal
    while prev[cell] is not None:
        cell, a = prev[cell]
        actions.append(a)
    return actions[::-1]


def test_blocked_by_outer_wall():
    s = maze.MazeState(0, 0)
    assert maze.maze_step(s, maze.UP) == (s, 0.0, False)
    assert maze.maze_step(s, maze.LEFT) == (s, 0.0, False)


def test_blocked_by_obstacle():
    s = maze.MazeState(2, 1)
    assert maze.maze_step(s, maze.RIGHT)[0] == s


def test_start_right():
    nxt, r, done = maze.maze_step(maze.MazeState(*maze.START), maze.RIGHT)
    assert nxt == (maze.START[0], maze.START[1] + 1) and r == 0.0 and not done


def test_invalid_action():
    with pytest.raises(ValueError):
        maze.maze_step(maze.MazeState(0, 0), 4)
    env = MazeEnv()
    env.reset()
    with pytest.raises(ValueError):
        env.step(-1)


def test_bfs_episode():
    actions = bfs_actions(maze.START, maze.GOAL)
    assert len(actions) == 14
    env = MazeEnv()
    env.reset(0)
    total = 0.0
    for i, a in enumerate(actions):
        _, r, done = env.step(a)
        total += r
        assert done == (i == len(actions) - 1)
    assert total == 1.0
    with pytest.raises(EpisodeOverError):
        env.step(0)


def test_layout():
    assert len(maze.CELLS) == 6 * 9 - 7
    assert maze.START not in maze.OBSTACLES and maze.GOAL not in maze.OBSTACLES


def test_maze_mdp_matches_independent_grid():
    mdp = maze_mdp()
    ref = grid_mdp(maze.ROWS, maze.COLS, set(maze.OBSTACLES), maze.GOAL, 0.95, start=maze.START)
    assert np.array_equal(mdp.transition, ref.transition)
    assert np.array_equal(mdp.reward, ref.reward)
    assert mdp.terminal == ref.terminal and mdp.initial_state == ref.initial_state


# -- cartpole ---------------------------------------------------------------------


def oracle_accelerations(state, force):
    """Solve the coupled cart/pole equations as a 2x2 mass-matrix system."""
    _, _, th, thd = state
    M, m, l, g = cp.CART_MASS, cp.POLE_MASS, cp.HALF_LENGTH, cp.GRAVITY
    A = np.array([[M + m, m * l * math.cos(th)], [math.cos(th), 4.0 / 3.0 * l]])
    b = np.array([force + m * l * thd**2 * math.sin(th), g * math.sin(th)])
    xacc, thacc = np.linalg.solve(A, b)
    return xacc, thacc


def oracle_derivative(y, force):
    xacc, thacc = oracle_accelerations(y, force)
    return np.array([y[1], xacc, y[3], thacc])


def oracle_step(state, force):
    y = np.array(state, dtype=float)
    return y + cp.TAU * oracle_derivative(y, force)


def rk4_trajectory(y, force, duration, substeps):
    h = duration / substeps
    for _ in range(substeps):
        k1 = oracle_derivative(y, force)
        k2 = oracle_derivative(y + h / 2 * k1, force)
        k3 = oracle_derivative(y + h / 2 * k2, force)
        k4 = oracle_derivative(y + h * k3, force)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_zero_velocity_keeps_position():
    s = cp.CartpoleState(0.3, 0.0, 0.05, 0.0)
    nxt, r, done = cp.cartpole_step(s, cp.RIGHT)
    assert nxt.position == 0.3 and nxt.angle == 0.05 and r == 1.0 and not done


states = st.tuples(
    st.floats(-2.4, 2.4), st.floats(-3, 3), st.floats(-0.2, 0.2), st.floats(-3, 3)
)


@given(states, st.sampled_from([cp.LEFT, cp.RIGHT]))
def test_step_matches_mass_matrix_oracle(state, action):
    force = cp.FORCE if action == cp.RIGHT else -cp.FORCE
    nxt, _, _ = cp.cartpole_step(cp.CartpoleState(*state), action)
    assert np.allclose(nxt, oracle_step(state, force), rtol=0, atol=1e-12)


@given(states, st.sampled_from([cp.LEFT, cp.RIGHT]))
def test_step_magnitude_bound(state, action):
    # with |angular velocity| <= 3 inside the angle bound the accelerations stay
    # below 15 (cart) and 25 (pole), so each component moves at most tau times that
    nxt, _, _ = cp.cartpole_step(cp.CartpoleState(*state), action)
    delta = np.abs(np.array(nxt) - np.array(state))
    bound = cp.TAU * np.array([abs(state[1]), 15.0, abs(state[3]), 25.0])
    assert np.all(delta <= bound + 1e-12)


def test_repeated_right_push_tilts_pole_back():
    s = cp.CartpoleState(0.0, 0.0, 0.0, 0.0)
    ref = np.zeros(4)
    angles = []
    for _ in range(8):
        s, _, _ = cp.cartpole_step(s, cp.RIGHT)
        ref = oracle_step(ref, cp.FORCE)
        assert np.allclose(s, ref, atol=1e-6)
        angles.append(s.angle)
    # the first step only moves velocities; afterwards the pole leans against the push
    assert angles[0] == 0.0
    assert all(a < 0 for a in angles[1:]) and np.all(np.diff(angles) <= 0)


def test_euler_tracks_fine_integrator():
    s0 = np.array([0.0, 0.1, 0.02, -0.1])
    s = cp.CartpoleState(*s0)
    for _ in range(10):
        s, _, _ = cp.cartpole_step(s, cp.RIGHT)
    fine = rk4_trajectory(s0, cp.FORCE, 10 * cp.TAU, 2000)
    # explicit Euler has O(tau) global error: over 10 steps the angle is off by
    # about 0.04 rad and the angular velocity by about 0.08 rad/s
    assert np.all(np.abs(np.array(s) - fine) <= [0.03, 0.01, 0.05, 0.1])
    assert np.sign(s.angle) == np.sign(fine[2])


def test_untouched_pole_falls():
    env = CartpoleEnv()
    env.reset(0)
    env.state = cp.CartpoleState(0.0, 0.0, 0.05, 0.0)
    y = np.array(env.state)
    steps, done = 0, False
    while not done:
        # alternate pushes cancel on average; the pole still falls
        _, _, done = env.step(steps % 2)
        y = oracle_step(y, cp.FORCE if steps % 2 else -cp.FORCE)
        steps += 1
    assert not env.truncated and steps < cp.MAX_STEPS
    assert env.state.angle > cp.ANGLE_LIMIT
    assert np.allclose(env.state, y, atol=1e-9)


def test_cartpole_cap_truncates():
    env = CartpoleEnv(max_steps=3)
    env.reset(1)
    done = False
    for a in (0, 1, 0):
        _, _, done = env.step(a)
    assert done and env.truncated


def test_cartpole_reset_range():
    env = CartpoleEnv()
    for seed in range(20):
        obs = env.reset(seed)
        assert obs.shape == (4,) and np.all(np.abs(obs) <= 0.05)


# -- predator-prey ----------------------------------------------------------------


def test_agent_blocked_at_border():
    state = pp.PredPreyState((0, 3), (5, 5))
    nxt, _, _ = pp.predprey_step(state, pp.UP, np.random.default_rng(0))
    assert nxt.agent_cell == (0, 3)


def test_invalid_predprey_action():
    with pytest.raises(ValueError):
        pp.predprey_step(pp.PredPreyState((0, 0), (3, 3)), 5, np.random.default_rng(0))


def test_prey_centre_distribution_uniform():
    rng = np.random.default_rng(7)
    centre = (3, 3)
    opts = pp.prey_options(centre)
    assert len(opts) == 5
    n = 100_000
    counts = dict.fromkeys(opts, 0)
    state = pp.PredPreyState((0, 0), centre)
    for _ in range(n):
        nxt, _, _ = pp.predprey_step(state, pp.STAY, rng)
        counts[nxt.prey_cell] += 1
    observed = np.array(list(counts.values()))
    chi2 = np.sum((observed - n / 5) ** 2 / (n / 5))
    assert chi2 < CHI2_4DF_999


@pytest.mark.parametrize(
    "agent, action, prey",
    [((0, 2), pp.LEFT, (0, 0)), ((0, 1), pp.LEFT, (0, 0)), ((1, 1), pp.STAY, (0, 0))],
)
def test_catch_frequency_matches_enumeration(agent, action, prey):
    target = pp.move(agent, action)
    opts = pp.prey_options(prey)
    p = sum(o == target for o in opts) / len(opts)
    rng = np.random.default_rng(11)
    n = 100_000
    state = pp.PredPreyState(agent, prey)
    hits = sum(pp.predprey_step(state, action, rng)[1] for _ in range(n))
    sd = math.sqrt(n * p * (1 - p))
    assert abs(hits - n * p) <= 3 * sd


def test_catch_ends_episode():
    env = PredPreyEnv()
    env.reset(0)
    env.state = pp.PredPreyState((0, 1), (0, 0))
    rng_state = env.rng.bit_generator.state
    # find an outcome by replaying the generator until the prey stays put
    for _ in range(50):
        env.rng.bit_generator.state = rng_state
        env.done = False
        env.state = pp.PredPreyState((0, 1), (0, 0))
        _, r, done = env.step(pp.LEFT)
        if r:
            assert done and not env.truncated
            return
        rng_state = env.rng.bit_generator.state
    pytest.fail("no catch in 50 attempts")


@given(st.integers(0, 2**31 - 1))
def test_observation_bits(seed):
    env = PredPreyEnv()
    obs = env.reset(seed)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        grid = obs.reshape(7, 7, 3)
        assert grid[:, :, 0].sum() == 1 and grid[:, :, 1].sum() == 1
        assert grid[:, :, 2].sum() == 24
        obs, _, done = env.step(int(rng.integers(5)))
        if done:
            break


def test_predprey_cap():
    env = PredPreyEnv(max_steps=2)
    env.reset(3)
    env.state = pp.PredPreyState((0, 0), (6, 6))
    env.step(pp.STAY)
    _, _, done = env.step(pp.STAY)
    assert done and env.truncated


# -- shared interface -------------------------------------------------------------


@pytest.mark.parametrize("name", ["maze", "cartpole", "predprey"])
def test_seed_determinism(name):
    actions = np.random.default_rng(0).integers(0, 2, size=60)

    def trace(seed):
        env = make_env(name)
        out = [np.array(env.reset(seed), dtype=float).tolist()]
        for a in actions:
            obs, r, done = env.step(int(a))
            out.append((np.array(obs, dtype=float).tolist(), r, done))
            if done:
                break
        return out

    assert trace(5) == trace(5)
    if name != "maze":
        assert trace(5) != trace(6)


def test_make_env_unknown():
    with pytest.raises(ValueError):
        make_env("atari")
