"""Scripted demonstrators: BFS for the grid, a PD waypoint follower for the point mass."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs import (
    MOVES,
    GridState,
    MazeSpec,
    PointMassState,
    bfs_path,
    cell_center,
    cell_of,
    grid_step,
    point_step,
)


class ExpertError(RuntimeError):
    pass


def path_to_moves(path: list[tuple[int, int]]) -> list[int]:
    moves = []
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        moves.append(MOVES.index((r1 - r0, c1 - c0)))
    return moves


def expert_grid(spec: MazeSpec, start=None) -> list[int]:
    """Shortest-path action indices (0..3 = up, down, left, right) to the goal."""
    path = bfs_path(spec.walls, spec.start if start is None else start, spec.goal)
    if path is None:
        raise ExpertError(f"maze seed {spec.seed}: goal unreachable from start")
    return path_to_moves(path)


def one_hot(a: int, n: int = 4) -> np.ndarray:
    v = np.zeros(n, dtype=np.float32)
    v[a] = 1.0
    return v


@dataclass
class PDGains:
    kp: float = 4.0
    kd: float = 1.5
    capture_radius: float = 0.3


def point_waypoint(spec: MazeSpec, state: PointMassState, capture_radius: float = 0.3):
    """Next waypoint along the BFS route: the center of the next cell on the
    path (the straight segment there stays inside two adjacent open cells),
    skipping waypoints already within ``capture_radius``; the goal itself last.
    """
    x, y = state.position
    path = bfs_path(spec.walls, cell_of(x, y), cell_of(*state.goal))
    if path is None:
        return tuple(state.goal)
    pts = [cell_center(c) for c in path[1:-1]] + [tuple(state.goal)]
    for wx, wy in pts[:-1]:
        if np.hypot(wx - x, wy - y) >= capture_radius:
            return (wx, wy)
    return pts[-1]


def expert_point(spec: MazeSpec, state: PointMassState, gains: PDGains = PDGains()) -> np.ndarray:
    """``clip(kp * (waypoint - p) - kd * v, -1, 1)``."""
    wx, wy = point_waypoint(spec, state, gains.capture_radius)
    x, y = state.position
    vx, vy = state.velocity
    a = np.array([gains.kp * (wx - x) - gains.kd * vx, gains.kp * (wy - y) - gains.kd * vy])
    return np.clip(a, -1.0, 1.0).astype(np.float32)


class ExpertPlanner:
    """Expert wrapped in the planner interface used by closed-loop control.

    Plans are produced by rolling the expert forward through the true
    dynamics for ``T_p`` steps from the env's current state.
    """

    def __init__(self, T_p: int, gains: PDGains = PDGains()):
        self.T_p = T_p
        self.gains = gains

    def plan_batch(self, histories, rngs, envs) -> np.ndarray:
        return np.stack([self.plan_env(env) for env in envs])

    def plan_env(self, env) -> np.ndarray:
        spec, state, cfg = env.spec, env.state, env.cfg
        out = []
        if isinstance(state, GridState):
            path = bfs_path(spec.walls, state.pos, state.goal)
            moves = path_to_moves(path) if path else []
            moves = moves or [0]
            for i in range(self.T_p):
                out.append(one_hot(moves[min(i, len(moves) - 1)]))
            return np.stack(out)
        s = state
        for _ in range(self.T_p):
            a = expert_point(spec, s, self.gains)
            out.append(a)
            if not s.done:
                s, _ = point_step(s, a, spec, cfg.dt, cfg.friction, cfg.goal_radius)
        return np.stack(out)


def expert_action(env, gains: PDGains = PDGains()) -> np.ndarray:
    """Single expert action vector for the env's current state."""
    if isinstance(env.state, GridState):
        moves = expert_grid(env.spec, start=env.state.pos) if env.state.pos != env.state.goal else [0]
        return one_hot(moves[0])
    return expert_point(env.spec, env.state, gains)


def rollout_grid(spec: MazeSpec, actions: list[int], max_steps: int | None = None):
    """Replay discrete actions from the start; returns visited cells and transitions."""
    s = GridState(spec.start, spec.goal)
    cells, trs = [s.pos], []
    for a in actions:
        s, tr = grid_step(s, a, spec, max_steps)
        cells.append(s.pos)
        trs.append(tr)
        if s.done:
            break
    return cells, trs
