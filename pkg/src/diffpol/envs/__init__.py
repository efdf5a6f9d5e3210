"""Desk-scale maze environments: discrete grid and continuous point mass."""
from .dynamics import (
    ACTION_NAMES,
    GOAL_REWARD,
    STEP_PENALTY,
    GridState,
    InputError,
    PointMassState,
    Transition,
    cell_center,
    cell_of,
    grid_step,
    point_step,
)
from .env import (
    DriftMode,
    EnvConfig,
    GridMazeEnv,
    MazeEnv,
    Observation,
    PointMazeEnv,
    StepOutcome,
    apply_drift,
    episode_seed,
    make_env,
)
from .maze import (
    MOVES,
    MazeSpec,
    UnsolvableMazeError,
    bfs_distances,
    bfs_path,
    generate_maze,
    maze_from_ascii,
    mirror_maze,
    open_maze,
)
from .render import render
