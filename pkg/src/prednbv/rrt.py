"""RRT-Connect path planning through the occupancy grid.

Two trees grow toward each other with a direct-connect shortcut and greedy
smoothing afterwards. Unknown cells are traversable (optimistic); occupied
cells and the grid border are hard constraints. Deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloudError, InvalidEndpointError, NoPathError, ParameterError
from .kernels import OCCUPIED, segment_free
from .occupancy import OccupancyGrid


@dataclass(frozen=True)
class RRTParams:
    step: float
    max_iters: int = 10000
    goal_tol: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.step <= 0:
            raise ParameterError(f"step must be positive, got {self.step}")
        if self.goal_tol is not None and self.goal_tol <= 0:
            raise ParameterError(f"goal_tol must be positive, got {self.goal_tol}")


@dataclass(frozen=True)
class Path:
    waypoints: np.ndarray
    length: float

    def __post_init__(self):
        w = np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "waypoints", w)


def path_length(waypoints) -> float:
    w = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
    if w.shape[0] == 0:
        raise EmptyCloudError("path has no waypoints")
    if w.shape[0] == 1:
        return 0.0
    return float(np.linalg.norm(np.diff(w, axis=0), axis=1).sum())


def _segment_ok(grid: OccupancyGrid, a: np.ndarray, b: np.ndarray) -> bool:
    ox, oy, oz = grid.origin
    return bool(
        segment_free(
            grid.cells, ox, oy, oz, grid.resolution,
            a[0], a[1], a[2], b[0], b[1], b[2], grid.resolution / 4.0,
        )
    )


def _check_endpoint(grid: OccupancyGrid, p: np.ndarray, label: str) -> None:
    if not grid.in_bounds(p):
        raise InvalidEndpointError(f"{label} {p} outside grid")
    i, j, k = grid.world_to_index(p)
    if grid.cells[i, j, k] == OCCUPIED:
        raise InvalidEndpointError(f"{label} {p} in an occupied cell")


def _shortcut(grid: OccupancyGrid, waypoints: list) -> list:
    """Greedy smoothing: from each waypoint jump to the farthest visible one."""
    out = list(waypoints)
    i = 0
    while i < len(out) - 2:
        for j in range(len(out) - 1, i + 1, -1):
            if _segment_ok(grid, out[i], out[j]):
                del out[i + 1 : j]
                break
        i += 1
    return out


def rrt_connect(start, goal, grid: OccupancyGrid, params: RRTParams) -> Path:
    """Collision-free polyline from start to goal, or NoPathError."""
    start = np.asarray(start, dtype=np.float64).reshape(3)
    goal = np.asarray(goal, dtype=np.float64).reshape(3)
    _check_endpoint(grid, start, "start")
    _check_endpoint(grid, goal, "goal")
    if np.array_equal(start, goal):
        return Path(start.reshape(1, 3), 0.0)
    if _segment_ok(grid, start, goal):
        w = np.vstack([start, goal])
        return Path(w, path_length(w))

    step = params.step
    tol = params.goal_tol if params.goal_tol is not None else step
    rng = np.random.default_rng(params.seed)
    lo = grid.origin
    hi = grid.origin + np.array(grid.dims) * grid.resolution

    nodes = [[start], [goal]]  # index 0 grows from start, 1 from goal
    parents = [[-1], [-1]]

    def extend(side: int, target: np.ndarray):
        """One bounded step of the tree toward target; returns new index or -1."""
        pts = np.asarray(nodes[side])
        near = int(np.argmin(((pts - target) ** 2).sum(axis=1)))
        base = nodes[side][near]
        delta = target - base
        dist = float(np.linalg.norm(delta))
        if dist < 1e-12:
            return -1, near
        reach = min(step, dist)
        new = base + delta * (reach / dist)
        if not grid.in_bounds(new) or not _segment_ok(grid, base, new):
            return -1, near
        nodes[side].append(new)
        parents[side].append(near)
        return len(nodes[side]) - 1, near

    def connect(side: int, target: np.ndarray):
        """Repeatedly extend toward target; returns tree index that reached it."""
        while True:
            idx, _ = extend(side, target)
            if idx < 0:
                return -1
            gap = float(np.linalg.norm(nodes[side][idx] - target))
            if gap <= tol and _segment_ok(grid, nodes[side][idx], target):
                return idx
            if gap >= float(np.linalg.norm(nodes[side][parents[side][idx]] - target)):
                return -1  # no progress

    turn = 0
    for _ in range(params.max_iters):
        sample = rng.uniform(lo, hi)
        new_idx, _ = extend(turn, sample)
        if new_idx >= 0:
            other = 1 - turn
            reached = connect(other, nodes[turn][new_idx])
            if reached >= 0:
                chain_turn = _chain(nodes[turn], parents[turn], new_idx)
                chain_other = _chain(nodes[other], parents[other], reached)
                if turn == 0:
                    way = chain_turn[::-1] + chain_other
                else:
                    way = chain_other[::-1] + chain_turn
                way = _shortcut(grid, way)
                w = np.asarray(way)
                return Path(w, path_length(w))
        turn = 1 - turn
    raise NoPathError(f"no path within {params.max_iters} iterations")


def _chain(nodes: list, parents: list, idx: int) -> list:
    out = []
    while idx >= 0:
        out.append(nodes[idx])
        idx = parents[idx]
    return out
