import json
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffpol.data import expert_grid, rollout_grid
from diffpol.envs import (
    GOAL_REWARD,
    DriftMode,
    EnvConfig,
    GridState,
    InputError,
    PointMassState,
    apply_drift,
    generate_maze,
    grid_step,
    make_env,
    maze_from_ascii,
    mirror_maze,
    open_maze,
    point_step,
    render,
)
from diffpol.nncore import ConfigError, StateError, make_rng


def _reachable(walls, start, goal):
    """Independent flood fill; deliberately not the package's BFS."""
    seen, todo = {start}, deque([start])
    H, W = walls.shape
    while todo:
        r, c = todo.popleft()
        if (r, c) == goal:
            return True
        for nr, nc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if 0 <= nr < H and 0 <= nc < W and not walls[nr, nc] and (nr, nc) not in seen:
                seen.add((nr, nc))
                todo.append((nr, nc))
    return False


# ------------------------------------------------------------ generator

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 40), st.sampled_from([5, 6, 7, 9, 10, 15]), st.sampled_from([5, 7, 8, 9, 15]))
def test_generated_mazes_are_solvable(seed, w, h):
    m = generate_maze(seed, w, h)
    assert m.walls.shape == (h, w)
    assert m.start != m.goal
    assert not m.walls[m.start] and not m.walls[m.goal]
    assert _reachable(m.walls, m.start, m.goal)


def test_generator_determinism_and_diversity():
    assert generate_maze(5, 9, 9) == generate_maze(5, 9, 9)
    differ = sum(not np.array_equal(generate_maze(2 * i, 9, 9).walls, generate_maze(2 * i + 1, 9, 9).walls)
                 for i in range(100))
    assert differ >= 99


@pytest.mark.parametrize("w,h", [(2, 5), (5, 2), (3, 3), (4, 4)])
def test_generator_rejects_tiny_sizes(w, h):
    with pytest.raises(ConfigError):
        generate_maze(0, w, h)


def test_mirror_is_involution():
    m = generate_maze(3, 9, 7)
    assert mirror_maze(mirror_maze(m)) == m


# ------------------------------------------------------------ grid dynamics

CORRIDOR = maze_from_ascii(["#####", "#S.G#", "#####"])


def test_grid_step_examples():
    s = GridState((1, 2), CORRIDOR.goal)
    s2, tr = grid_step(s, 3, CORRIDOR)
    assert tr.reward == GOAL_REWARD and tr.done and s2.pos == CORRIDOR.goal
    s2, tr = grid_step(GridState((1, 1), CORRIDOR.goal), 0, CORRIDOR)
    assert s2.pos == (1, 1) and tr.reward == pytest.approx(-0.01)
    with pytest.raises(StateError):
        grid_step(GridState((1, 1), CORRIDOR.goal, done=True), 0, CORRIDOR)
    with pytest.raises(InputError):
        grid_step(GridState((1, 1), CORRIDOR.goal), 7, CORRIDOR)


def test_grid_max_steps_caps_episode():
    s = GridState((1, 1), CORRIDOR.goal)
    s, tr = grid_step(s, 0, CORRIDOR, max_steps=2)
    assert not tr.done
    s, tr = grid_step(s, 0, CORRIDOR, max_steps=2)
    assert tr.done and not tr.success


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.sampled_from([5, 7, 9, 15]))
def test_expert_rollout_reaches_goal_in_path_length(seed, size):
    m = generate_maze(seed, size, size)
    moves = expert_grid(m)
    cells, trs = rollout_grid(m, moves, max_steps=10 * size * size)
    assert trs[-1].success and len(trs) == len(moves) and cells[-1] == m.goal


def test_expert_grid_examples():
    long = maze_from_ascii(["######", "#S..G#", "######"])
    assert expert_grid(long) == [3, 3, 3]
    assert expert_grid(CORRIDOR, start=(1, 2)) == [3]


# ------------------------------------------------------------ point mass

def test_point_step_hand_integration():
    m = open_maze(5, 5)
    s = PointMassState((0.0, 0.0), (0.0, 0.0), (4.5, 4.5))
    s2, tr = point_step(s, (1.0, 0.0), m, dt=0.1, friction=0.0)
    assert s2.velocity == pytest.approx((0.1, 0.0))
    assert s2.position == pytest.approx((0.01, 0.0))
    s2, _ = point_step(s, (0.0, 0.0), m, dt=0.1, friction=0.0)
    assert s2.position == s.position and s2.velocity == s.velocity and s2.t == 1


def test_point_head_on_wall_zeroes_normal_velocity():
    # wall column at x in [2, 3); agent moving right and up next to it
    m = maze_from_ascii(["S.#..", "..#..", "..#.G"])
    s = PointMassState((1.99, 1.5), (0.5, 0.3), (4.5, 0.5))
    s2, _ = point_step(s, (0.0, 0.0), m, dt=0.1, friction=0.0)
    assert s2.velocity[0] == 0.0 and s2.position[0] == 1.99
    assert s2.velocity[1] == pytest.approx(0.3)
    assert s2.position[1] == pytest.approx(1.53)


def test_point_rejects_non_finite():
    s = PointMassState((0.5, 0.5), (0.0, 0.0), (2.5, 2.5))
    with pytest.raises(InputError):
        point_step(s, (np.nan, 0.0), open_maze(3, 3))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=60))
def test_point_never_enters_walls(seed, actions):
    m = generate_maze(seed, 7, 7)
    x, y = m.start[1] + 0.5, m.start[0] + 0.5
    s = PointMassState((x, y), (0.0, 0.0), (-100.0, -100.0))
    for a in actions:
        s, _ = point_step(s, a, m, dt=0.5, friction=0.0)
        assert m.is_open((int(np.floor(s.position[1])), int(np.floor(s.position[0]))))


# ------------------------------------------------------------ drift & env

def test_drift_none_and_regenerate():
    m = generate_maze(1, 7, 7)
    assert apply_drift(m, DriftMode("none"), 3, 0, make_rng(0), base_seed=1) is m
    a = apply_drift(m, DriftMode("regenerate"), 0, 0, make_rng(0), base_seed=10)
    b = apply_drift(m, DriftMode("regenerate"), 1, 0, make_rng(0), base_seed=10)
    assert a != b


def test_goal_shift_moves_goal_to_reachable_cell():
    cfg = EnvConfig(kind="grid", width=9, height=9, images=False, drift=DriftMode("goal_shift", 3))
    env = make_env(cfg, 4)
    env.reset(0)
    goals = {env.spec.goal}
    for _ in range(12):
        out = env.step(0)
        if out.done:
            break
        assert _reachable(env.spec.walls, env.agent_cell(), env.spec.goal)
        assert tuple(env.state_vector()[2:].astype(int)) == env.spec.goal
        goals.add(env.spec.goal)
    assert len(goals) > 1


def test_env_config_validation_lists_every_error():
    errs = EnvConfig(kind="boat", width=2, drift=DriftMode("goal_shift", 0)).validate()
    assert len(errs) >= 3


def test_env_reset_determinism_and_log(tmp_path):
    cfg = EnvConfig(kind="point", width=7, height=7)
    a, b = make_env(cfg, 9), make_env(cfg, 9)
    oa, ob = a.reset(2), b.reset(2)
    np.testing.assert_array_equal(oa.image, ob.image)
    a.enable_log()
    a.step((0.5, -0.5))
    a.write_log(tmp_path / "log.jsonl")
    rec = json.loads((tmp_path / "log.jsonl").read_text().splitlines()[0])
    assert rec["t"] == 1 and rec["episode"] == 2


# ------------------------------------------------------------ render

def test_render_examples():
    m = generate_maze(0, 7, 7)
    img = render(m, 64, agent=(m.start[1] + 0.5, m.start[0] + 0.5))
    assert img.shape == (64, 64, 3) and img.dtype == np.float32
    assert img.min() >= 0 and img.max() <= 1
    np.testing.assert_array_equal(img, render(m, 64, agent=(m.start[1] + 0.5, m.start[0] + 0.5)))
    blank = render(open_maze(1, 1, goal=(0, 0)), 4)
    assert np.all(blank == blank[0, 0])
    with pytest.raises(ConfigError):
        render(m, 5)


def test_render_agent_visible_at_one_pixel_per_cell():
    m = generate_maze(0, 7, 7)
    a = render(m, 7)
    b = render(m, 7, agent=(m.start[1] + 0.5, m.start[0] + 0.5))
    assert not np.array_equal(a[m.start], b[m.start])
