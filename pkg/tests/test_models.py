import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import grid_mdp
from eea.envs import CartpoleEnv, maze_mdp
from eea.envs import maze
from eea.envs import predprey as pp
from eea.mdp import assumption_audit
from eea.models import (
    ConcatActionModel,
    ExactBackward,
    PerActionModel,
    TransitionDataset,
    exact_backward_lookup,
    exact_models,
    hypothetical_state,
    hypothetical_states,
    load_model,
    save_model,
    train_backward,
    train_forward,
)
from eea.nn import LinearModel

IDX = maze.CELL_INDEX
LEFT = maze.LEFT


def linear_system(rng, n=4, actions=2, samples=300):
    """x' = A_a x + c_a with well-conditioned, invertible A_a."""
    A = [np.eye(n) + 0.1 * rng.normal(size=(n, n)) for _ in range(actions)]
    c = [0.1 * rng.normal(size=n) for _ in range(actions)]
    data = TransitionDataset()
    for _ in range(samples):
        x = rng.normal(size=n)
        a = int(rng.integers(actions))
        data.add(x, a, A[a] @ x + c[a])
    return A, c, data


# -- exact models -----------------------------------------------------------------


def test_backward_free_right_neighbour():
    mdp = maze_mdp()
    assert exact_backward_lookup(mdp, IDX[(5, 3)], LEFT) == IDX[(5, 4)]


def test_backward_obstacle_to_right():
    mdp = maze_mdp()
    # (4, 4) has the obstacle (4, 5) on its right and a free cell on its left,
    # so no left move ends there under either convention
    assert exact_backward_lookup(mdp, IDX[(4, 4)], LEFT) is None
    assert exact_backward_lookup(mdp, IDX[(4, 4)], LEFT, allow_self_predecessor=True) is None


def test_blocked_self_move_convention():
    mdp = maze_mdp()
    # (1, 8): wall on the right, obstacle on the left, so only its own blocked
    # left move ends there
    s = IDX[(1, 8)]
    assert exact_backward_lookup(mdp, s, LEFT) is None
    assert exact_backward_lookup(mdp, s, LEFT, allow_self_predecessor=True) == s
    # a west-wall cell is reached from its right neighbour either way
    assert exact_backward_lookup(mdp, IDX[(5, 0)], LEFT, True) == IDX[(5, 1)]


def test_backward_terminal_is_never_a_predecessor():
    mdp = maze_mdp()
    # the goal (0, 8) sits right of (0, 7), an obstacle; nothing should come from the goal
    for s2 in range(mdp.state_count):
        p = exact_backward_lookup(mdp, s2, LEFT, True)
        assert p is None or p not in mdp.terminal


def test_absent_count_matches_audit():
    mdp = maze_mdp()
    bwd = ExactBackward(mdp)
    audit = assumption_audit(mdp, LEFT)
    reachable = {int(np.argmax(mdp.transition[s, a])) for s in range(mdp.state_count)
                 if s not in mdp.terminal for a in range(4) if a != LEFT}
    absent = {s2 for s2 in reachable if bwd.predict(s2, LEFT) is None}
    assert absent == set(audit.border_states)
    assert len(absent) == 13


def test_hypothetical_identity_branch():
    fwd, bwd = exact_models(maze_mdp())
    for s in range(5):
        assert hypothetical_state(fwd, bwd, s, LEFT, LEFT) == s


def test_hypothetical_up():
    fwd, bwd = exact_models(maze_mdp())
    assert hypothetical_state(fwd, bwd, IDX[(4, 3)], maze.UP, LEFT) == IDX[(3, 4)]


@st.composite
def grids(draw):
    rows, cols = draw(st.integers(2, 5)), draw(st.integers(2, 6))
    cells = [(r, c) for r in range(rows) for c in range(cols)]
    blocked = draw(st.sets(st.sampled_from(cells), max_size=len(cells) // 3))
    free = [c for c in cells if c not in blocked] or cells
    if len(free) < 2:
        blocked, free = set(), cells
    return grid_mdp(rows, cols, blocked, draw(st.sampled_from(free))), draw(st.integers(0, 3))


@given(grids(), st.booleans())
def test_exact_round_trip(case, allow_self):
    mdp, a_hyp = case
    fwd, bwd = exact_models(mdp, allow_self)
    for s in range(mdp.state_count):
        if s in mdp.terminal:
            continue
        for a in range(4):
            s_hyp = hypothetical_state(fwd, bwd, s, a, a_hyp)
            if s_hyp is not None:
                assert fwd.predict(s_hyp, a_hyp) == fwd.predict(s, a)


# -- learned models ---------------------------------------------------------------


def test_linear_system_forward_and_backward(rng):
    _, _, data = linear_system(rng)
    fwd = PerActionModel.linear(4, 2, rng)
    bwd = PerActionModel.linear(4, 2, rng)
    assert train_forward(fwd, data, "sgd", 1000, 0.3, rng=rng)[-1] < 1e-8
    assert train_backward(bwd, data, "sgd", 1000, 0.3, rng=rng)[-1] < 1e-8


def test_hypothetical_state_is_closed_form_composition(rng):
    A, c, data = linear_system(rng)
    fwd = PerActionModel.linear(4, 2, rng)
    bwd = PerActionModel.linear(4, 2, rng)
    train_forward(fwd, data, "sgd", 1000, 0.3, rng=rng)
    train_backward(bwd, data, "sgd", 1000, 0.3, rng=rng)
    x = rng.normal(size=(20, 4))
    a = np.ones(20, dtype=int)
    expected = np.linalg.solve(A[0], ((A[1] @ x.T).T + c[1] - c[0]).T).T
    got = hypothetical_states(fwd, bwd, x, a, 0)
    assert np.max(np.abs(got - expected)) < 1e-6
    # rows with the hypothetical action come back untouched
    assert np.array_equal(hypothetical_states(fwd, bwd, x, np.zeros(20, int), 0), x)


def test_batched_matches_single(rng):
    _, _, data = linear_system(rng)
    fwd = PerActionModel.linear(4, 2, rng)
    bwd = PerActionModel.linear(4, 2, rng)
    x = rng.normal(size=(6, 4))
    a = np.array([0, 1, 1, 0, 1, 0])
    batched = hypothetical_states(fwd, bwd, x, a, 0)
    for i in range(6):
        assert np.allclose(batched[i], hypothetical_state(fwd, bwd, x[i], a[i], 0))


def test_zero_epochs_leave_model_unchanged(rng):
    _, _, data = linear_system(rng)
    model = PerActionModel.linear(4, 2, rng)
    before = [n.params.copy() for n in model.nets]
    assert train_forward(model, data, epochs=0) == []
    assert all(np.array_equal(b, n.params) for b, n in zip(before, model.nets))


def test_single_transition_memorized(rng):
    data = TransitionDataset()
    data.add([0.1, -0.2], 1, [0.3, 0.4])
    model = ConcatActionModel(LinearModel(4, 2, rng), 2)
    train_forward(model, data, "sgd", 2000, 0.1)
    assert np.allclose(model.predict([0.1, -0.2], 1), [0.3, 0.4], atol=1e-6)


def test_empty_dataset_raises():
    with pytest.raises(ValueError, match="empty"):
        train_forward(PerActionModel.linear(2, 2), TransitionDataset())


def test_dataset_shapes_checked():
    data = TransitionDataset()
    data.add([1.0, 2.0], 0, [1.0, 2.0])
    with pytest.raises(ValueError):
        data.add([1.0], 0, [1.0])


def prey_dataset(rng, n):
    """Agent fixed away from the prey; prey starts at the centre and moves at random."""
    data = TransitionDataset()
    state = pp.PredPreyState((0, 0), (3, 3))
    obs = pp.observe(state)
    for _ in range(n):
        nxt, _, _ = pp.predprey_step(state, pp.STAY, rng)
        data.add(obs, pp.STAY, pp.observe(nxt))
    return data, obs


def test_stochastic_prey_learns_conditional_mean(rng):
    data, obs = prey_dataset(rng, 2000)
    model = ConcatActionModel.build(147, 5, hidden=(32,), activation="tanh", rng=rng)
    train_forward(model, data, "adam", 100, 1e-2, rng=rng)
    pred = model.predict(obs, pp.STAY).reshape(7, 7, 3)[:, :, 1]
    expected = np.zeros((7, 7))
    for cell in pp.prey_options((3, 3)):
        expected[cell] += 1 / 5
    assert np.linalg.norm(pred - expected) < 0.05


def test_cartpole_backward_error_baseline():
    # three random-policy episodes, per-action linear models, held-out backward error
    rng = np.random.default_rng(0)
    env = CartpoleEnv()
    train, held = TransitionDataset(), TransitionDataset()
    for ep in range(6):
        obs = env.reset(ep)
        done = False
        while not done:
            a = int(rng.integers(2))
            nxt, _, done = env.step(a)
            (train if ep < 3 else held).add(obs, a, nxt)
            obs = nxt
    bwd = PerActionModel.linear(4, 2, rng)
    train_backward(bwd, train, "adam", 8000, 1e-2, rng=rng)
    train_backward(bwd, train, "adam", 2000, 1e-3, rng=rng)
    x, a, x2 = held.arrays()
    err = np.mean((bwd.predict(x2, a) - x) ** 2)
    # pilot value about 3e-6, the least-squares floor for this data
    assert err < 1e-5


def test_learned_models_deterministic(rng):
    model = ConcatActionModel.build(4, 2, hidden=(8,), rng=rng)
    x = rng.normal(size=(3, 4))
    assert np.array_equal(model.predict(x, 1), model.predict(x, 1))


# -- persistence ------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["per-action", "one-hot"])
def test_save_load(tmp_path, rng, kind):
    if kind == "per-action":
        model = PerActionModel.linear(3, 2, rng)
    else:
        model = ConcatActionModel.build(3, 2, hidden=(5, 4), rng=rng)
    path = save_model(model, tmp_path, "forward", "toy", {"epochs": 7})
    manifest = json.loads(path.read_text())
    assert manifest["action_conditioning"] == kind and manifest["training_budget"] == {"epochs": 7}
    back, _ = load_model(tmp_path, "forward")
    x = rng.normal(size=(4, 3))
    a = np.array([0, 1, 1, 0])
    assert np.array_equal(back.predict(x, a), model.predict(x, a))


def test_load_missing(tmp_path):
    with pytest.raises(FileNotFoundError, match="backward"):
        load_model(tmp_path, "backward")
    with pytest.raises(ValueError):
        save_model(PerActionModel.linear(2, 2), tmp_path, "sideways", "toy", {})
