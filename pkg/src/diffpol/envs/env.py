"""Stateful maze environments wrapping the pure step functions."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..nncore import ConfigError, StateError, make_rng
from .dynamics import (
    GridState,
    PointMassState,
    Transition,
    cell_center,
    cell_of,
    grid_step,
    point_step,
)
from .maze import MazeSpec, bfs_distances, generate_maze
from .render import render

log = logging.getLogger(__name__)

DRIFT_KINDS = ("none", "regenerate", "goal_shift")
ENV_KINDS = ("grid", "point")


@dataclass
class DriftMode:
    """``none``: one static maze from the base seed for every episode.
    ``regenerate``: a fresh maze per episode (seed = base_seed XOR episode).
    ``goal_shift``: regenerate per episode, and every ``period`` steps move the
    goal to a random open cell reachable from the agent.
    """

    kind: str = "regenerate"
    period: int = 50

    def validate(self) -> list[str]:
        errs = []
        if self.kind not in DRIFT_KINDS:
            errs.append(f"env.drift.kind must be one of {DRIFT_KINDS} (got {self.kind!r})")
        if self.kind == "goal_shift" and (not isinstance(self.period, int) or self.period < 1):
            errs.append(f"env.drift.period must be an integer >= 1 for goal_shift (got {self.period!r})")
        return errs


def episode_seed(base_seed: int, episode_index: int, mode: DriftMode) -> int:
    return base_seed if mode.kind == "none" else base_seed ^ episode_index


def apply_drift(spec: MazeSpec, mode: DriftMode, episode_index: int, step_index: int,
                rng: np.random.Generator, agent_cell=None, base_seed: int | None = None) -> MazeSpec:
    """Return the maze as it should look at (episode, step).

    At step 0 a regenerating mode rebuilds the maze from the episode seed;
    goal_shift relocates the goal every ``period`` steps.
    """
    if mode.kind == "none":
        return spec
    if step_index == 0:
        if base_seed is None:
            return spec
        return generate_maze(base_seed ^ episode_index, spec.width, spec.height)
    if mode.kind != "goal_shift" or step_index % mode.period:
        return spec
    src = agent_cell if agent_cell is not None else spec.start
    dist = bfs_distances(spec.walls, src)
    candidates = [(int(r), int(c)) for r, c in np.argwhere(dist > 0) if (r, c) != spec.goal]
    if not candidates:
        log.warning("goal shift at step %d: no reachable replacement goal, keeping %s", step_index, spec.goal)
        return spec
    return spec.with_goal(candidates[int(rng.integers(len(candidates)))])


@dataclass
class EnvConfig:
    kind: str = "point"
    width: int = 7
    height: int = 7
    drift: DriftMode = field(default_factory=DriftMode)
    dt: float = 0.1
    friction: float = 0.05
    goal_radius: float = 0.4
    resolution: int = 14
    max_steps: int = 400
    images: bool = True

    def validate(self) -> list[str]:
        errs = []
        if self.kind not in ENV_KINDS:
            errs.append(f"env.kind must be one of {ENV_KINDS} (got {self.kind!r})")
        if self.width < 3 or self.height < 3:
            errs.append(f"env.width/height must be >= 3 (got {self.width}x{self.height})")
        if self.dt <= 0:
            errs.append(f"env.dt must be > 0 (got {self.dt})")
        if not 0 <= self.friction < 1:
            errs.append(f"env.friction must be in [0, 1) (got {self.friction})")
        if self.goal_radius <= 0:
            errs.append(f"env.goal_radius must be > 0 (got {self.goal_radius})")
        if self.max_steps < 1:
            errs.append(f"env.max_steps must be >= 1 (got {self.max_steps})")
        if self.images and self.resolution < max(self.width, self.height):
            errs.append(f"env.resolution ({self.resolution}) must be >= grid size "
                        f"({max(self.width, self.height)})")
        errs += self.drift.validate()
        return errs

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        d["drift"] = DriftMode(**d.get("drift", {}))
        return cls(**d)


@dataclass
class Observation:
    image: np.ndarray | None  # [res, res, 3]
    state: np.ndarray  # f32 [S]


@dataclass
class StepOutcome:
    observation: Observation
    reward: float
    done: bool
    success: bool


class MazeEnv:
    """Shared episode bookkeeping: seeding, drift, rendering, replay log."""

    state_dim: int
    action_dim: int

    def __init__(self, cfg: EnvConfig, base_seed: int = 0):
        errs = cfg.validate()
        if errs:
            raise ConfigError("; ".join(errs))
        self.cfg = cfg
        self.base_seed = int(base_seed)
        self.spec: MazeSpec | None = None
        self.state = None
        self.episode = -1
        self.log_records: list[dict] | None = None
        self._drift_rng = None

    @property
    def image_shape(self):
        return (self.cfg.resolution, self.cfg.resolution, 3) if self.cfg.images else None

    def reset(self, episode_index: int = 0) -> Observation:
        self.episode = int(episode_index)
        seed = episode_seed(self.base_seed, self.episode, self.cfg.drift)
        self.spec = generate_maze(seed, self.cfg.width, self.cfg.height)
        self._drift_rng = make_rng(seed ^ 0x5EED_D41F7)
        self.state = self._initial_state()
        if self.log_records is not None:
            self.log_records.clear()
        return self.observe()

    def step(self, action) -> StepOutcome:
        if self.state is None:
            raise StateError("step called before reset")
        self.state, tr = self._advance(self.state, action)
        if not tr.done and self.cfg.drift.kind == "goal_shift":
            new = apply_drift(self.spec, self.cfg.drift, self.episode, self.state.t, self._drift_rng,
                              agent_cell=self.agent_cell())
            if new.goal != self.spec.goal:
                self.spec = new
                self.state = self._retarget(self.state, new.goal)
        if self.log_records is not None:
            self.log_records.append({
                "episode": self.episode, "t": self.state.t, "state": self.state_vector().tolist(),
                "action": np.asarray(action).tolist(), "reward": tr.reward, "done": tr.done,
            })
        return StepOutcome(self.observe(), tr.reward, tr.done, tr.success)

    def observe(self) -> Observation:
        image = None
        if self.cfg.images:
            image = render(self.spec, self.cfg.resolution, agent=self.agent_point(),
                           goal=cell_center(self.spec.goal))
        return Observation(image, self.state_vector())

    def enable_log(self) -> None:
        self.log_records = []

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.log_records or []:
                fh.write(json.dumps(rec) + "\n")

    # subclasses
    def _initial_state(self):
        raise NotImplementedError

    def _advance(self, state, action) -> tuple[object, Transition]:
        raise NotImplementedError

    def _retarget(self, state, goal_cell):
        raise NotImplementedError

    def agent_cell(self):
        raise NotImplementedError

    def agent_point(self):
        raise NotImplementedError

    def state_vector(self) -> np.ndarray:
        raise NotImplementedError


class GridMazeEnv(MazeEnv):
    """Discrete maze; actions 0..3 = up, down, left, right.

    State vector: ``[row, col, goal_row, goal_col]``.
    """

    state_dim = 4
    action_dim = 4

    def _initial_state(self):
        return GridState(self.spec.start, self.spec.goal)

    def _advance(self, state, action):
        a = np.asarray(action)
        if a.ndim:  # logits or one-hot
            a = int(np.argmax(a))
        return grid_step(state, int(a), self.spec, self.cfg.max_steps)

    def _retarget(self, state, goal_cell):
        return replace(state, goal=goal_cell)

    def agent_cell(self):
        return self.state.pos

    def agent_point(self):
        return cell_center(self.state.pos)

    def state_vector(self):
        s = self.state
        return np.array([s.pos[0], s.pos[1], s.goal[0], s.goal[1]], dtype=np.float32)


class PointMazeEnv(MazeEnv):
    """Continuous point mass; actions are forces in [-1, 1]^2.

    State vector: ``[x, y, vx, vy, goal_x, goal_y]``.
    """

    state_dim = 6
    action_dim = 2

    def _initial_state(self):
        return PointMassState(cell_center(self.spec.start), (0.0, 0.0), cell_center(self.spec.goal))

    def _advance(self, state, action):
        c = self.cfg
        return point_step(state, action, self.spec, c.dt, c.friction, c.goal_radius, c.max_steps)

    def _retarget(self, state, goal_cell):
        return replace(state, goal=cell_center(goal_cell))

    def agent_cell(self):
        return cell_of(*self.state.position)

    def agent_point(self):
        return self.state.position

    def state_vector(self):
        s = self.state
        return np.array([*s.position, *s.velocity, *s.goal], dtype=np.float32)


def make_env(cfg: EnvConfig, base_seed: int = 0) -> MazeEnv:
    if cfg.kind == "grid":
        return GridMazeEnv(cfg, base_seed)
    if cfg.kind == "point":
        return PointMazeEnv(cfg, base_seed)
    raise ConfigError(f"unknown env kind {cfg.kind!r}")
