"""Point clouds, rigid poses, voxel filtering, and bounding statistics.

Points are float64 arrays of shape (3,) in meters; clouds are (n, 3).
The sensor frame convention is +X forward, +Y left, +Z up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloudError, ParameterError

WORLD = "world"
SENSOR = "sensor"


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 3)
    if pts.ndim == 1 and pts.shape[0] == 3:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ParameterError(f"expected (n, 3) points, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """Ordered container of 3D points with a frame label. May be empty."""

    points: np.ndarray
    frame: str = WORLD

    def __post_init__(self):
        pts = _as_points(self.points)
        if pts.size and not np.all(np.isfinite(pts)):
            raise ParameterError("cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.points.shape[0] == 0

    @staticmethod
    def empty(frame: str = WORLD) -> "PointCloud":
        return PointCloud(np.zeros((0, 3)), frame)


@dataclass(frozen=True)
class CloudStats:
    """Centroid, max centroid distance, and z extent of a non-empty cloud."""

    centroid: np.ndarray
    d_max: float
    z_range: float


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _matrix_to_quat(m: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the largest diagonal combination for stability
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


@dataclass(frozen=True)
class Pose:
    """Rigid sensor pose: position plus unit quaternion (w, x, y, z)."""

    position: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        quat = np.asarray(self.quaternion, dtype=np.float64).reshape(4)
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(quat)):
            raise ParameterError("pose contains non-finite values")
        norm = np.linalg.norm(quat)
        if abs(norm - 1.0) > 1e-9:
            raise ParameterError(f"quaternion norm {norm} deviates from 1 by more than 1e-9")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "quaternion", quat)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3))

    def rotation(self) -> np.ndarray:
        return _quat_to_matrix(self.quaternion)

    def forward(self) -> np.ndarray:
        return self.rotation()[:, 0]

    def left(self) -> np.ndarray:
        return self.rotation()[:, 1]

    def up(self) -> np.ndarray:
        return self.rotation()[:, 2]

    def inverse(self) -> "Pose":
        r = self.rotation()
        q = self.quaternion * np.array([1.0, -1.0, -1.0, -1.0])
        q = q / np.linalg.norm(q)
        return Pose(-r.T @ self.position, q)


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Pose at `eye` with the +X axis pointing at `target`.

    Falls back to +X as the up hint when the view direction is vertical.
    """
    eye = np.asarray(eye, dtype=np.float64).reshape(3)
    target = np.asarray(target, dtype=np.float64).reshape(3)
    fwd = target - eye
    dist = np.linalg.norm(fwd)
    if dist < 1e-12:
        raise ParameterError("look_at target coincides with eye")
    fwd = fwd / dist
    up = np.asarray(up, dtype=np.float64).reshape(3)
    left = np.cross(up, fwd)
    if np.linalg.norm(left) < 1e-9:
        left = np.cross(np.array([1.0, 0.0, 0.0]), fwd)
    left = left / np.linalg.norm(left)
    true_up = np.cross(fwd, left)
    m = np.column_stack([fwd, left, true_up])
    return Pose(eye, _matrix_to_quat(m))


def transform(cloud: PointCloud, pose: Pose) -> PointCloud:
    """Apply the rigid transform: world = R @ p + t."""
    if cloud.is_empty:
        return PointCloud.empty(cloud.frame)
    r = pose.rotation()
    return PointCloud(cloud.points @ r.T + pose.position, cloud.frame)


def to_sensor_frame(cloud: PointCloud, pose: Pose) -> PointCloud:
    """Express world-frame points in the pose's sensor frame."""
    if cloud.is_empty:
        return PointCloud.empty(SENSOR)
    r = pose.rotation()
    return PointCloud((cloud.points - pose.position) @ r, SENSOR)


def voxel_filter(cloud: PointCloud, leaf: float = 0.1) -> PointCloud:
    """Keep one representative per occupied voxel: the centroid of its points.

    The voxel lattice is anchored at the world origin, so filtering an
    already-filtered cloud at the same leaf is a bit-exact no-op.
    """
    if leaf <= 0:
        raise ParameterError(f"leaf must be positive, got {leaf}")
    if cloud.is_empty:
        return PointCloud.empty(cloud.frame)
    keys = np.floor(cloud.points / leaf).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((uniq.shape[0], 3))
    np.add.at(sums, inverse, cloud.points)
    counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(np.float64)
    return PointCloud(sums / counts[:, None], cloud.frame)


def cloud_stats(cloud: PointCloud) -> CloudStats:
    """Centroid, d_max (farthest point from centroid), and z extent."""
    if cloud.is_empty:
        raise EmptyCloudError("cloud_stats requires a non-empty cloud")
    centroid = cloud.points.mean(axis=0)
    d_max = float(np.linalg.norm(cloud.points - centroid, axis=1).max())
    z = cloud.points[:, 2]
    return CloudStats(centroid=centroid, d_max=d_max, z_range=float(z.max() - z.min()))


def merge(a: PointCloud, b: PointCloud) -> PointCloud:
    if a.frame != b.frame:
        raise ParameterError(f"cannot merge clouds in frames {a.frame!r} and {b.frame!r}")
    return PointCloud(np.vstack([a.points, b.points]), a.frame)


def clouds_close(a: PointCloud, b: PointCloud, tol: float = 1e-9) -> bool:
    """Set-style equality: equal counts and mutual nearest neighbors within tol."""
    if len(a) != len(b):
        return False
    if len(a) == 0:
        return True
    from scipy.spatial import cKDTree

    da, _ = cKDTree(b.points).query(a.points)
    db, _ = cKDTree(a.points).query(b.points)
    return bool(da.max() <= tol and db.max() <= tol)
