from __future__ import annotations

import numpy as np

from ..nncore import ConfigError
from .maze import MazeSpec

WALL = np.array([0.15, 0.15, 0.15], dtype=np.float32)
FLOOR = np.array([0.9, 0.9, 0.9], dtype=np.float32)
GOAL = np.array([0.1, 0.75, 0.2], dtype=np.float32)
AGENT = np.array([0.85, 0.15, 0.1], dtype=np.float32)
DISK_RADIUS = 0.35  # cell units


def _disk(img, xs, ys, center, color):
    cx, cy = center
    d2 = (xs - cx) ** 2 + (ys[:, None] - cy) ** 2
    # at coarse resolutions the disk may miss every pixel center; the nearest
    # pixels (all of them on a tie, so mirroring commutes) are then painted
    img[d2 <= max(DISK_RADIUS ** 2, d2.min() + 1e-9)] = color


def render(spec: MazeSpec, resolution: int, agent=None, goal=None) -> np.ndarray:
    """Top-down RGB image [res, res, 3] in [0, 1].

    ``agent`` / ``goal`` are continuous ``(x, y)`` points in cell units (or
    None to skip the overlay). Cells are nearest-neighbor scaled.
    """
    if resolution < max(spec.width, spec.height):
        raise ConfigError(f"render resolution {resolution} is below the grid size "
                          f"{spec.width}x{spec.height}")
    xs = (np.arange(resolution) + 0.5) * spec.width / resolution
    ys = (np.arange(resolution) + 0.5) * spec.height / resolution
    cols = np.floor(xs).astype(int)
    rows = np.floor(ys).astype(int)
    blocked = spec.walls[np.ix_(rows, cols)]
    img = np.where(blocked[..., None], WALL, FLOOR).astype(np.float32)
    if goal is not None:
        _disk(img, xs, ys, goal, GOAL)
    if agent is not None:
        _disk(img, xs, ys, agent, AGENT)
    return img
