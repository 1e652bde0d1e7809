"""Ternary occupancy grid built by carving sensor rays, plus frontier extraction.

Cells are unknown (0), free (1), or occupied (2). Carving never downgrades an
occupied cell, so integration is idempotent and independent of ray order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BoundsError, ParameterError
from .kernels import FREE, OCCUPIED, UNKNOWN, carve_rays
from .sensor import Observation

_STATE_NAMES = {UNKNOWN: "unknown", FREE: "free", OCCUPIED: "occupied"}


@dataclass
class OccupancyGrid:
    origin: np.ndarray
    resolution: float
    cells: np.ndarray

    def __post_init__(self):
        if self.resolution <= 0:
            raise ParameterError(f"resolution must be positive, got {self.resolution}")
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        cells = np.asarray(self.cells, dtype=np.uint8)
        if cells.ndim != 3:
            raise ParameterError(f"cells must be 3D, got shape {cells.shape}")
        self.cells = np.ascontiguousarray(cells)

    @classmethod
    def create(cls, center, half_extent: float, resolution: float) -> "OccupancyGrid":
        """Cube grid of side 2 * half_extent centered on `center`, all unknown."""
        if resolution <= 0:
            raise ParameterError(f"resolution must be positive, got {resolution}")
        center = np.asarray(center, dtype=np.float64).reshape(3)
        n = max(1, int(np.ceil(2 * half_extent / resolution)))
        origin = center - 0.5 * n * resolution
        return cls(origin, resolution, np.zeros((n, n, n), dtype=np.uint8))

    @property
    def dims(self):
        return self.cells.shape

    def world_to_index(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=np.float64).reshape(3)
        return np.floor((p - self.origin) / self.resolution).astype(np.int64)

    def in_bounds(self, point) -> bool:
        idx = self.world_to_index(point)
        return bool(np.all(idx >= 0) and np.all(idx < np.array(self.dims)))

    def state_at(self, point) -> int:
        if not self.in_bounds(point):
            raise BoundsError(f"point {point} outside grid")
        i, j, k = self.world_to_index(point)
        return int(self.cells[i, j, k])

    def cell_center(self, ijk) -> np.ndarray:
        return self.origin + (np.asarray(ijk, dtype=np.float64) + 0.5) * self.resolution

    def counts(self) -> dict:
        vals, cnt = np.unique(self.cells, return_counts=True)
        out = {"unknown": 0, "free": 0, "occupied": 0}
        for v, c in zip(vals, cnt):
            out[_STATE_NAMES[int(v)]] = int(c)
        return out

    def summary_json(self) -> str:
        return json.dumps(
            {"dims": list(self.dims), "resolution": self.resolution, "counts": self.counts()},
            sort_keys=True,
        )

    def save_cells(self, path) -> None:
        """One byte per cell, x varying fastest, little-endian (byte order moot)."""
        with open(path, "wb") as fh:
            fh.write(self.cells.ravel(order="F").tobytes())


def _obstacle_entry_t(sensor: np.ndarray, targets: np.ndarray, obstacles) -> np.ndarray:
    """Earliest t in [0, 1) where each sensor->target segment enters an obstacle
    box; 1.0 where it reaches the target unobstructed."""
    t_hit = np.ones(targets.shape[0])
    d = targets - sensor
    nz = d != 0
    for box in obstacles:
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(nz, (box.lo - sensor) / d, 0.0)
            t2 = np.where(nz, (box.hi - sensor) / d, 0.0)
        lo = np.where(nz, np.minimum(t1, t2), -np.inf)
        hi = np.where(nz, np.maximum(t1, t2), np.inf)
        # a ray parallel to a slab (d == 0) misses the box unless the sensor
        # coordinate already lies inside that slab
        inside = (sensor >= box.lo) & (sensor <= box.hi)
        blocked = ~nz & ~inside
        lo = np.where(blocked, np.inf, lo)
        hi = np.where(blocked, -np.inf, hi)
        t_enter = lo.max(axis=1)
        t_exit = hi.min(axis=1)
        hits = (t_enter <= t_exit) & (t_exit >= 0.0) & (t_enter < t_hit)
        t_hit = np.where(hits, np.maximum(t_enter, 0.0), t_hit)
    return t_hit


def integrate(grid: OccupancyGrid, obs: Observation, obstacles=()) -> OccupancyGrid:
    """Carve the observation's sensing rays into the grid (in place).

    Cells crossed by a sensor->point ray become free, each endpoint cell becomes
    occupied, and rays are truncated at the first obstacle box they enter, whose
    entry cell is marked occupied so collision checks stay sound.
    """
    sensor = obs.pose.position
    if not grid.in_bounds(sensor):
        raise BoundsError(f"observation pose {sensor} outside grid")
    if obs.cloud.is_empty:
        return grid
    targets = obs.cloud.points
    if obstacles:
        t_hit = _obstacle_entry_t(sensor, targets, obstacles)
        targets = sensor + (targets - sensor) * t_hit[:, None]
    ox, oy, oz = grid.origin
    sx, sy, sz = sensor
    carve_rays(grid.cells, ox, oy, oz, grid.resolution, sx, sy, sz, np.ascontiguousarray(targets))
    return grid


def frontier_clusters(grid: OccupancyGrid) -> list:
    """Frontier cells (free with an unknown 6-neighbor) grouped by 26-connectivity.

    Returns [(centroid, size)] sorted by size descending, then by first-seen
    label order for determinism. Grid borders do not count as unknown.
    """
    free = grid.cells == FREE
    unknown = grid.cells == UNKNOWN
    near_unknown = np.zeros_like(free)
    for axis in range(3):
        for shift in (1, -1):
            near_unknown |= np.roll(unknown, shift, axis=axis) & _roll_valid(
                unknown.shape, axis, shift
            )
    frontier = free & near_unknown
    if not frontier.any():
        return []
    labels, n_labels = ndimage.label(frontier, structure=np.ones((3, 3, 3), dtype=int))
    clusters = []
    for lab in range(1, n_labels + 1):
        idx = np.argwhere(labels == lab)
        centers = grid.origin + (idx + 0.5) * grid.resolution
        clusters.append((centers.mean(axis=0), idx.shape[0]))
    clusters.sort(key=lambda cs: -cs[1])
    return clusters


def _roll_valid(shape, axis: int, shift: int) -> np.ndarray:
    """Mask of positions whose np.roll neighbor is real (not wrapped around)."""
    valid = np.ones(shape, dtype=bool)
    sl = [slice(None)] * 3
    sl[axis] = slice(0, 1) if shift == 1 else slice(-1, None)
    valid[tuple(sl)] = False
    return valid


def frontiers(grid: OccupancyGrid) -> list:
    """Frontier cluster centroids, largest cluster first."""
    return [centroid for centroid, _ in frontier_clusters(grid)]
