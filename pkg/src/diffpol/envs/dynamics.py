"""Pure step functions for the grid and point-mass mazes.

Continuous coordinates are ``(x, y)`` in cell units: cell ``(row, col)``
covers ``[col, col+1) x [row, row+1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..nncore import StateError
from .maze import MOVES, MazeSpec

GOAL_REWARD = 10.0
STEP_PENALTY = 0.01
ACTION_NAMES = ("up", "down", "left", "right")


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class GridState:
    pos: tuple[int, int]
    goal: tuple[int, int]
    t: int = 0
    done: bool = False


@dataclass(frozen=True)
class Transition:
    reward: float
    done: bool
    success: bool


def grid_step(state: GridState, action: int, spec: MazeSpec, max_steps: int | None = None
              ) -> tuple[GridState, Transition]:
    if state.done:
        raise StateError("grid_step called on a finished episode; reset first")
    a = int(action)
    if not 0 <= a < 4:
        raise InputError(f"grid action must be in 0..3 (got {action!r})")
    dr, dc = MOVES[a]
    nxt = (state.pos[0] + dr, state.pos[1] + dc)
    pos = nxt if spec.is_open(nxt) else state.pos
    t = state.t + 1
    if pos == state.goal:
        return GridState(pos, state.goal, t, True), Transition(GOAL_REWARD, True, True)
    done = max_steps is not None and t >= max_steps
    return GridState(pos, state.goal, t, done), Transition(-STEP_PENALTY, done, False)


@dataclass(frozen=True)
class PointMassState:
    position: tuple[float, float]
    velocity: tuple[float, float]
    goal: tuple[float, float]
    t: int = 0
    done: bool = False


def cell_of(x: float, y: float) -> tuple[int, int]:
    return (int(math.floor(y)), int(math.floor(x)))


def cell_center(cell) -> tuple[float, float]:
    return (cell[1] + 0.5, cell[0] + 0.5)


def point_step(state: PointMassState, action, spec: MazeSpec, dt: float = 0.1,
               friction: float = 0.05, goal_radius: float = 0.4, max_steps: int | None = None
               ) -> tuple[PointMassState, Transition]:
    """Semi-implicit Euler with axis-separated wall sliding."""
    if state.done:
        raise StateError("point_step called on a finished episode; reset first")
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise InputError(f"point action must be two finite numbers (got {action!r})")
    ax, ay = np.clip(a, -1.0, 1.0)
    keep = 1.0 - friction
    vx = (state.velocity[0] + ax * dt) * keep
    vy = (state.velocity[1] + ay * dt) * keep
    x, y = state.position
    nx = x + vx * dt
    if spec.is_open(cell_of(nx, y)):
        x = nx
    else:
        vx = 0.0
    ny = y + vy * dt
    if spec.is_open(cell_of(x, ny)):
        y = ny
    else:
        vy = 0.0
    t = state.t + 1
    gx, gy = state.goal
    if math.hypot(x - gx, y - gy) < goal_radius:
        return PointMassState((x, y), (vx, vy), state.goal, t, True), Transition(GOAL_REWARD, True, True)
    done = max_steps is not None and t >= max_steps
    return (PointMassState((x, y), (vx, vy), state.goal, t, done),
            Transition(-STEP_PENALTY * dt, done, False))


def with_goal(state, goal):
    return replace(state, goal=goal)
