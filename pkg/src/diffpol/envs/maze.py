"""Procedural perfect mazes on an odd-coordinate lattice, plus BFS helpers.

Cells are addressed ``(row, col)``; ``walls[row, col]`` is True when blocked.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from ..nncore import ConfigError, make_rng

MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


class UnsolvableMazeError(RuntimeError):
    pass


@dataclass(frozen=True)
class MazeSpec:
    width: int
    height: int
    walls: np.ndarray  # bool [height, width]
    start: tuple[int, int]
    goal: tuple[int, int]
    seed: int

    def is_open(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width and not self.walls[r, c]

    def open_cells(self) -> list[tuple[int, int]]:
        return [(int(r), int(c)) for r, c in np.argwhere(~self.walls)]

    def with_goal(self, goal) -> "MazeSpec":
        return replace(self, goal=(int(goal[0]), int(goal[1])))

    def __eq__(self, other):
        return (isinstance(other, MazeSpec) and self.width == other.width and self.height == other.height
                and self.start == other.start and self.goal == other.goal and self.seed == other.seed
                and np.array_equal(self.walls, other.walls))

    def __hash__(self):
        return hash((self.width, self.height, self.start, self.goal, self.seed, self.walls.tobytes()))


def bfs_distances(walls: np.ndarray, src) -> np.ndarray:
    """Shortest 4-connected step counts from ``src``; -1 where unreachable."""
    H, W = walls.shape
    dist = np.full((H, W), -1, dtype=np.int64)
    dist[src] = 0
    q = deque([tuple(src)])
    while q:
        r, c = q.popleft()
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < H and 0 <= nc < W and not walls[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = dist[r, c] + 1
                q.append((nr, nc))
    return dist


def bfs_path(walls: np.ndarray, start, goal) -> list[tuple[int, int]] | None:
    """Cells from ``start`` to ``goal`` inclusive, or None if unreachable.

    Ties between equally short routes resolve in MOVES order from the goal side.
    """
    start, goal = tuple(map(int, start)), tuple(map(int, goal))
    dist = bfs_distances(walls, goal)
    if dist[start] < 0:
        return None
    H, W = walls.shape
    path = [start]
    cur = start
    while cur != goal:
        r, c = cur
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < H and 0 <= nc < W and dist[nr, nc] == dist[r, c] - 1:
                cur = (nr, nc)
                break
        path.append(cur)
    return path


def generate_maze(seed: int, width: int, height: int) -> MazeSpec:
    """Randomized-DFS perfect maze; start and goal are distinct open cells."""
    if width < 3 or height < 3:
        raise ConfigError(f"maze size must be at least 3x3 (got {width}x{height})")
    rng = make_rng(seed)
    walls = np.ones((height, width), dtype=bool)
    rows = range(1, height - 1, 2)
    cols = range(1, width - 1, 2)
    r0 = int(rng.choice(list(rows)))
    c0 = int(rng.choice(list(cols)))
    walls[r0, c0] = False
    stack = [(r0, c0)]
    while stack:
        r, c = stack[-1]
        nbrs = []
        for dr, dc in MOVES:
            nr, nc = r + 2 * dr, c + 2 * dc
            if 1 <= nr <= height - 2 and 1 <= nc <= width - 2 and walls[nr, nc]:
                nbrs.append((nr, nc, dr, dc))
        if nbrs:
            nr, nc, dr, dc = nbrs[int(rng.integers(len(nbrs)))]
            walls[r + dr, c + dc] = False
            walls[nr, nc] = False
            stack.append((nr, nc))
        else:
            stack.pop()
    open_cells = [(int(r), int(c)) for r, c in np.argwhere(~walls)]
    if len(open_cells) < 2:
        raise ConfigError(f"{width}x{height} maze has a single open cell; start and goal must differ")
    i, j = rng.choice(len(open_cells), size=2, replace=False)
    spec = MazeSpec(width, height, walls, open_cells[int(i)], open_cells[int(j)], int(seed))
    if bfs_path(walls, spec.start, spec.goal) is None:
        raise UnsolvableMazeError(f"seed {seed}: generated maze is not connected")
    return spec


def open_maze(width: int, height: int, start=(0, 0), goal=None) -> MazeSpec:
    """Wall-free map, handy for dynamics checks."""
    walls = np.zeros((height, width), dtype=bool)
    goal = goal if goal is not None else (height - 1, width - 1)
    return MazeSpec(width, height, walls, tuple(start), tuple(goal), 0)


def maze_from_ascii(rows: list[str], seed: int = 0) -> MazeSpec:
    """``#`` wall, ``.`` floor, ``S`` start, ``G`` goal."""
    walls = np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)
    start = goal = None
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "S":
                start = (r, c)
            elif ch == "G":
                goal = (r, c)
    if start is None or goal is None:
        raise ValueError("ascii maze needs one S and one G")
    return MazeSpec(walls.shape[1], walls.shape[0], walls, start, goal, seed)


def mirror_maze(spec: MazeSpec) -> MazeSpec:
    """Left-right mirror image of a maze (columns reversed)."""
    W = spec.width

    def m(cell):
        return (cell[0], W - 1 - cell[1])

    return MazeSpec(spec.width, spec.height, spec.walls[:, ::-1].copy(), m(spec.start), m(spec.goal), spec.seed)
