"""Visibility: hidden point removal, frustum culling, and information gain.

Hidden point removal follows the spherical-flipping construction: each point
p (viewpoint-centered) maps to p + 2(R - |p|) * p/|p| with R tied to the
cloud extent; a point is visible iff its image lies on the convex hull of
the flipped set plus the viewpoint origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import DegenerateViewpointError, EmptyCloudError, ParameterError
from .geometry import PointCloud, Pose, to_sensor_frame

HULL_TOL = 1e-7
DEFAULT_RADIUS_SCALE = 100.0


@dataclass(frozen=True)
class CameraIntrinsics:
    horizontal_fov: float = 90.0
    vertical_fov: float = 60.0
    max_range: float = 100.0
    min_range: float = 0.5

    def __post_init__(self):
        if not (0 < self.horizontal_fov < 180) or not (0 < self.vertical_fov < 180):
            raise ParameterError("fov must lie in (0, 180) degrees per axis")
        if not (0 <= self.min_range < self.max_range):
            raise ParameterError("need 0 <= min_range < max_range")


@dataclass(frozen=True)
class VisibilityResult:
    visible_indices: np.ndarray
    count: int

    def __post_init__(self):
        idx = np.asarray(self.visible_indices, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "visible_indices", idx)
        object.__setattr__(self, "count", int(idx.shape[0]))


def _rank_projection(pts: np.ndarray):
    """Principal axes and numerical rank of a centered point set."""
    center = pts.mean(axis=0)
    q = pts - center
    scale = float(np.abs(q).max())
    if scale == 0.0:
        return center, np.eye(3), 0
    _, s, vt = np.linalg.svd(q / scale, full_matrices=False)
    rank = int((s > 1e-9 * max(1.0, s[0])).sum())
    return center, vt, rank


def _hull_member_indices(pts: np.ndarray) -> set:
    """Indices of points on the convex hull boundary, including coplanar points
    within HULL_TOL of a supporting hyperplane. Falls back to lower-dimensional
    hulls for degenerate (flat or collinear) inputs."""
    n = pts.shape[0]
    if n <= 2:
        return set(range(n))
    center, vt, rank = _rank_projection(pts)
    if rank >= 3:
        try:
            return _hull_members_nd(pts)
        except QhullError:
            rank = 2  # nearly flat: retry in the best-fit plane
    if rank == 2:
        flat = (pts - center) @ vt[:2].T
        try:
            return _hull_members_nd(flat)
        except QhullError:
            rank = 1
    if rank == 1:
        t = (pts - center) @ vt[0]
        lo, hi = t.min(), t.max()
        return set(np.flatnonzero((t <= lo + HULL_TOL) | (t >= hi - HULL_TOL)).tolist())
    return set(range(n))


def _hull_members_nd(pts: np.ndarray) -> set:
    hull = ConvexHull(pts, qhull_options="Qc")
    members = set(hull.vertices.tolist())
    if hull.coplanar.size:
        eq = hull.equations
        for point_idx, facet_idx, _ in hull.coplanar:
            plane = eq[facet_idx]
            dist = float(plane[:-1] @ pts[point_idx] + plane[-1])
            if dist >= -HULL_TOL:
                members.add(int(point_idx))
    return members


def hidden_point_removal(
    cloud: PointCloud, viewpoint, radius_scale: float = DEFAULT_RADIUS_SCALE
) -> VisibilityResult:
    """Visible-point indices from `viewpoint` via spherical flipping."""
    if cloud.is_empty:
        raise EmptyCloudError("hidden_point_removal requires a non-empty cloud")
    if radius_scale < 1:
        raise ParameterError(f"radius_scale must be >= 1, got {radius_scale}")
    vp = np.asarray(viewpoint, dtype=np.float64).reshape(3)
    q = cloud.points - vp
    d = np.linalg.norm(q, axis=1)
    if d.min() <= 1e-9:
        raise DegenerateViewpointError("viewpoint coincides with a cloud point")
    radius = radius_scale * d.max()
    flipped = q * (2.0 * radius / d - 1.0)[:, None]
    pts = np.vstack([flipped, np.zeros(3)])
    members = _hull_member_indices(pts)
    members.discard(cloud.points.shape[0])  # drop the viewpoint origin
    idx = np.array(sorted(members), dtype=np.int64)
    return VisibilityResult(idx, idx.shape[0])


def frustum_cull(cloud: PointCloud, pose: Pose, intrinsics: CameraIntrinsics) -> VisibilityResult:
    """Points inside both half-FOV wedges and the [min_range, max_range] band.

    Boundary handling: the frustum is closed (<=) on the FOV planes and range
    limits, and strictly open on the x > 0 plane, so a near-180 degree FOV
    degrades to the open front half-space.
    """
    if cloud.is_empty:
        return VisibilityResult(np.zeros(0, np.int64), 0)
    local = to_sensor_frame(cloud, pose).points
    x, y, z = local[:, 0], local[:, 1], local[:, 2]
    rng = np.linalg.norm(local, axis=1)
    tan_h = np.tan(np.radians(intrinsics.horizontal_fov) / 2.0)
    tan_v = np.tan(np.radians(intrinsics.vertical_fov) / 2.0)
    keep = (
        (x > 0)
        & (np.abs(y) <= x * tan_h)
        & (np.abs(z) <= x * tan_v)
        & (rng >= intrinsics.min_range)
        & (rng <= intrinsics.max_range)
    )
    idx = np.flatnonzero(keep).astype(np.int64)
    return VisibilityResult(idx, idx.shape[0])


def novel_mask(predicted: PointCloud, observed: PointCloud, distinct_tol: float) -> np.ndarray:
    """Boolean mask over predicted points with no observed point within distinct_tol."""
    if predicted.is_empty:
        raise EmptyCloudError("info gain requires a non-empty prediction")
    if distinct_tol <= 0:
        raise ParameterError(f"distinct_tol must be positive, got {distinct_tol}")
    if observed.is_empty:
        return np.ones(len(predicted), dtype=bool)
    d, _ = cKDTree(observed.points).query(predicted.points, k=1)
    return d > distinct_tol


def novel_points(predicted: PointCloud, observed: PointCloud, distinct_tol: float) -> PointCloud:
    """Predicted points with no observed point within distinct_tol."""
    mask = novel_mask(predicted, observed, distinct_tol)
    return PointCloud(predicted.points[mask], predicted.frame)


def candidate_gain(
    predicted: PointCloud,
    novel: np.ndarray,
    candidate: Pose,
    intrinsics: CameraIntrinsics,
    radius_scale: float = DEFAULT_RADIUS_SCALE,
) -> int:
    """Count of novel points visible from the candidate.

    Occlusion is resolved against the whole predicted cloud, not the novel
    subset alone: already-observed surface still blocks sight lines, so a
    view cannot claim gain by peering through the hole the novelty filter
    cut out of the model.
    """
    if predicted.is_empty or not novel.any():
        return 0
    # a point sitting on the viewpoint cannot be sensed; drop it rather than fail
    d = np.linalg.norm(predicted.points - candidate.position, axis=1)
    keep = d > 1e-9
    pts = predicted.points[keep]
    if pts.shape[0] == 0:
        return 0
    trimmed = PointCloud(pts, predicted.frame)
    trimmed_novel = novel[keep]
    vis = hidden_point_removal(trimmed, candidate.position, radius_scale)
    front = PointCloud(trimmed.points[vis.visible_indices], trimmed.frame)
    in_frustum = frustum_cull(front, candidate, intrinsics)
    chosen = vis.visible_indices[in_frustum.visible_indices]
    return int(trimmed_novel[chosen].sum())


def info_gain(
    predicted: PointCloud,
    observed: PointCloud,
    candidate: Pose,
    intrinsics: CameraIntrinsics,
    distinct_tol: float,
    radius_scale: float = DEFAULT_RADIUS_SCALE,
) -> int:
    """Novel predicted points visible from the candidate pose."""
    mask = novel_mask(predicted, observed, distinct_tol)
    return candidate_gain(predicted, mask, candidate, intrinsics, radius_scale)
