"""Simulated depth sensing of a ground-truth object cloud from a pose.

An observation is the frustum-culled, self-occlusion-filtered view of the
object, optionally jittered, then voxel-filtered. Segmentation is assumed
perfect: obstacle geometry never contributes points (it only matters for
collision checking and ray carving).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloudError, InvalidPoseError, ParameterError
from .geometry import PointCloud, Pose, voxel_filter
from .visibility import DEFAULT_RADIUS_SCALE, CameraIntrinsics, frustum_cull, hidden_point_removal


@dataclass(frozen=True)
class AABB:
    """Axis-aligned box given by min/max corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ParameterError("box corners must be finite")
        if np.any(lo > hi):
            raise ParameterError(f"box min {lo} exceeds max {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, points: np.ndarray, strict: bool = False) -> np.ndarray:
        pts = np.atleast_2d(points)
        if strict:
            m = np.all((pts > self.lo) & (pts < self.hi), axis=1)
        else:
            m = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        return m

    def inflated(self, margin: float) -> "AABB":
        return AABB(self.lo - margin, self.hi + margin)


def bounding_box(cloud: PointCloud) -> AABB:
    if cloud.is_empty:
        raise EmptyCloudError("bounding_box requires a non-empty cloud")
    return AABB(cloud.points.min(axis=0), cloud.points.max(axis=0))


@dataclass(frozen=True)
class SceneModel:
    """Ground-truth object surface plus non-target obstacle boxes."""

    object: PointCloud
    obstacles: tuple = ()
    name: str = "scene"

    def __post_init__(self):
        if self.object.is_empty:
            raise EmptyCloudError("scene object cloud is empty")
        obstacles = tuple(self.obstacles)
        for box in obstacles:
            if box.contains(self.object.points, strict=True).any():
                raise ParameterError(f"scene {self.name!r}: object intersects an obstacle interior")
        object.__setattr__(self, "obstacles", obstacles)


@dataclass(frozen=True)
class Observation:
    cloud: PointCloud
    pose: Pose
    step: int = 0


def valid_sensing_position(scene: SceneModel, position, intrinsics: CameraIntrinsics) -> bool:
    """True when a sensor placed here satisfies sense()'s pose precondition."""
    pos = np.asarray(position, dtype=np.float64).reshape(3)
    if bounding_box(scene.object).inflated(intrinsics.min_range).contains(pos).any():
        return False
    for box in scene.obstacles:
        if box.contains(pos).any():
            return False
    return True


def sense(
    scene: SceneModel,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    noise_sigma: float = 0.0,
    seed: int = 0,
    leaf: float = 0.1,
    radius_scale: float = DEFAULT_RADIUS_SCALE,
    step: int = 0,
) -> Observation:
    """Synthetic depth scan: frustum cull, hidden point removal, jitter, voxel filter."""
    if noise_sigma < 0:
        raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    pos = pose.position
    if not valid_sensing_position(scene, pos, intrinsics):
        raise InvalidPoseError(f"sensor pose {pos} is inside the object bounds or an obstacle")
    in_frustum = frustum_cull(scene.object, pose, intrinsics)
    if in_frustum.count == 0:
        return Observation(PointCloud.empty(), pose, step)
    seen = PointCloud(scene.object.points[in_frustum.visible_indices], scene.object.frame)
    vis = hidden_point_removal(seen, pos, radius_scale)
    pts = seen.points[vis.visible_indices]
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        pts = pts + rng.normal(0.0, noise_sigma, size=pts.shape)
    cloud = voxel_filter(PointCloud(pts, scene.object.frame), leaf)
    return Observation(cloud, pose, step)
