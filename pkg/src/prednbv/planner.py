"""Prediction-driven next-best-view planning.

Candidates live on three rings around the predicted cloud; the planner picks
the cheapest view whose information gain stays within a fraction tau of the
best gain, and stops once the observation count plateaus. A frontier-driven
policy over the same sensing and stopping machinery serves as the baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyCloudError,
    ExplorationCompleteError,
    InvalidEndpointError,
    NoPathError,
    ParameterError,
    StartVisibilityError,
    ZeroGainError,
)
from .geometry import CloudStats, PointCloud, Pose, cloud_stats, look_at, merge, voxel_filter
from .kernels import FREE, OCCUPIED
from .metrics import coverage
from .occupancy import OccupancyGrid, frontier_clusters, integrate
from .rrt import Path, RRTParams, path_length, rrt_connect
from .sensor import SceneModel, bounding_box, sense, valid_sensing_position
from .visibility import DEFAULT_RADIUS_SCALE, CameraIntrinsics, candidate_gain, novel_mask

MIDDLE_RADIUS_FACTOR = 1.5
OUTER_RADIUS_FACTOR = 1.2
RING_HEIGHT_FACTOR = 0.25
BASELINE_STANDOFF_FACTOR = 1.5


@dataclass(frozen=True)
class PlannerConfig:
    tau: float = 0.95
    stop_ratio: float = 0.95
    angle_step: float = 30.0
    max_steps: int = 10
    distinct_tol: float = 0.5
    distance_mode: str = "rrt"
    leaf: float = 0.5  # voxel leaf for observation unions
    coverage_tol: float = None  # defaults to leaf
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    noise_sigma: float = 0.0
    seed: int = 0
    radius_scale: float = DEFAULT_RADIUS_SCALE
    grid_resolution: float = 1.0
    rrt_step: float = 2.0
    rrt_max_iters: int = 10000

    def __post_init__(self):
        if not (0 < self.tau <= 1):
            raise ParameterError(f"tau must be in (0, 1], got {self.tau}")
        if not (0 < self.stop_ratio <= 1):
            raise ParameterError(f"stop_ratio must be in (0, 1], got {self.stop_ratio}")
        if self.angle_step <= 0 or 360.0 % self.angle_step != 0:
            raise ParameterError(f"angle_step must divide 360, got {self.angle_step}")
        if self.max_steps < 0:
            raise ParameterError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.distinct_tol <= 0:
            raise ParameterError(f"distinct_tol must be positive, got {self.distinct_tol}")
        if self.distance_mode not in ("rrt", "euclidean"):
            raise ParameterError(f"distance_mode must be rrt or euclidean, got {self.distance_mode}")
        if self.leaf <= 0:
            raise ParameterError(f"leaf must be positive, got {self.leaf}")
        if self.coverage_tol is None:
            object.__setattr__(self, "coverage_tol", self.leaf)


@dataclass(frozen=True)
class CandidateSet:
    poses: tuple
    source_stats: CloudStats

    def __len__(self) -> int:
        return len(self.poses)


def generate_candidates(predicted: PointCloud, cfg: PlannerConfig) -> CandidateSet:
    """Poses on three rings around the predicted cloud, all looking at its centroid.

    Middle ring: radius 1.5 * d_max at centroid height. Upper and lower rings:
    radius 1.2 * d_max at centroid z +/- 0.25 * z_range. A flat cloud
    (z_range 0) collapses the outer rings into one.
    """
    if predicted.is_empty:
        raise EmptyCloudError("candidate generation requires a non-empty prediction")
    stats = cloud_stats(predicted)
    if stats.d_max <= 0:
        raise DegenerateInputError("prediction has zero extent; rings are degenerate")
    cx, cy, cz = stats.centroid
    dz = RING_HEIGHT_FACTOR * stats.z_range
    rings = [(MIDDLE_RADIUS_FACTOR * stats.d_max, cz)]
    if dz > 0:
        rings.append((OUTER_RADIUS_FACTOR * stats.d_max, cz + dz))
        rings.append((OUTER_RADIUS_FACTOR * stats.d_max, cz - dz))
    else:
        rings.append((OUTER_RADIUS_FACTOR * stats.d_max, cz))
    angles = np.radians(np.arange(0.0, 360.0, cfg.angle_step))
    poses = []
    for radius, z in rings:
        for a in angles:
            eye = np.array([cx + radius * np.cos(a), cy + radius * np.sin(a), z])
            poses.append(look_at(eye, stats.centroid))
    return CandidateSet(tuple(poses), stats)


def select_from_scores(gains, distances, tau: float) -> int:
    """Index of the cheapest candidate whose gain is within tau of the best.

    Feasible set: gain >= tau * max(gains). Among feasible: minimum distance,
    ties broken by higher gain, then by lowest index.
    """
    gains = list(gains)
    distances = list(distances)
    if not gains or len(gains) != len(distances):
        raise ParameterError("gains and distances must be non-empty and equal length")
    best_gain = max(gains)
    if best_gain <= 0:
        raise ZeroGainError("no candidate offers information gain")
    threshold = tau * best_gain
    feasible = [i for i, g in enumerate(gains) if g >= threshold]
    return min(feasible, key=lambda i: (distances[i], -gains[i], i))


@dataclass(frozen=True)
class SelectionResult:
    pose: Pose
    path: Path
    gain: int
    index: int
    max_gain: int
    fallback: bool = False  # all candidates unreachable; distances fell back to Euclidean


def _straight_path(a: np.ndarray, b: np.ndarray) -> Path:
    w = np.vstack([a, b])
    return Path(w, path_length(w))


def _rrt_seed(cfg: PlannerConfig, step: int, index: int) -> int:
    # keyed by candidate identity, not planning order, so pruning never shifts streams
    return (cfg.seed * 1_000_003 + step) * 1_009 + index


def select_nbv(
    candidates: CandidateSet,
    current: Pose,
    predicted: PointCloud,
    observed: PointCloud,
    grid: OccupancyGrid,
    cfg: PlannerConfig,
    step: int = 0,
) -> SelectionResult:
    """Cheapest-to-reach candidate whose gain is >= tau * best gain.

    rrt mode plans an actual path per feasible candidate, processing them in
    ascending straight-line order and stopping once no unplanned candidate can
    beat the best path found (straight-line distance lower-bounds path length).
    """
    if len(candidates) == 0:
        raise ParameterError("candidate set is empty")
    poses = candidates.poses
    novel = novel_mask(predicted, observed, cfg.distinct_tol)
    usable = [
        i
        for i, p in enumerate(poses)
        if grid.in_bounds(p.position) and grid.state_at(p.position) != OCCUPIED
    ]
    if not usable:
        raise ZeroGainError("no candidate lies in traversable space")
    gains = {
        i: candidate_gain(predicted, novel, poses[i], cfg.intrinsics, cfg.radius_scale)
        for i in usable
    }
    best_gain = max(gains.values())
    if best_gain <= 0:
        raise ZeroGainError("no candidate offers information gain")
    threshold = cfg.tau * best_gain
    feasible = [i for i in usable if gains[i] >= threshold]
    euclid = {i: float(np.linalg.norm(poses[i].position - current.position)) for i in feasible}

    if cfg.distance_mode == "euclidean":
        pick = min(feasible, key=lambda i: (euclid[i], -gains[i], i))
        path = _straight_path(current.position, poses[pick].position)
        return SelectionResult(poses[pick], path, gains[pick], pick, best_gain)

    best = None  # (length, -gain, index, path)
    for i in sorted(feasible, key=lambda i: (euclid[i], -gains[i], i)):
        if best is not None and best[0] < euclid[i]:
            break  # no remaining candidate can beat the best path
        params = RRTParams(
            step=cfg.rrt_step, max_iters=cfg.rrt_max_iters, seed=_rrt_seed(cfg, step, i)
        )
        try:
            path = rrt_connect(current.position, poses[i].position, grid, params)
        except (NoPathError, InvalidEndpointError):
            continue
        key = (path.length, -gains[i], i, path)
        if best is None or key[:3] < best[:3]:
            best = key
    if best is None:
        # nothing reachable this step: fall back to straight-line distances
        pick = min(feasible, key=lambda i: (euclid[i], -gains[i], i))
        path = _straight_path(current.position, poses[pick].position)
        return SelectionResult(poses[pick], path, gains[pick], pick, best_gain, fallback=True)
    _, neg_gain, pick, path = best
    return SelectionResult(poses[pick], path, -neg_gain, pick, best_gain)


def should_stop(prev_count, curr_count: int, cfg: PlannerConfig) -> bool:
    """True once the previous/current observation-count ratio reaches stop_ratio."""
    if prev_count is None:
        return False
    if prev_count < 0 or curr_count < prev_count:
        raise ParameterError(f"counts must satisfy 0 <= prev <= curr, got {prev_count}, {curr_count}")
    return curr_count > 0 and prev_count / curr_count >= cfg.stop_ratio


@dataclass(frozen=True)
class Trajectory:
    poses: tuple
    cumulative_length: float
    per_step_observed_counts: tuple


@dataclass(frozen=True)
class EpisodeReport:
    trajectory: Trajectory
    final_observed: PointCloud
    coverage: float
    total_distance: float
    steps: int
    per_step: tuple
    stop_reason: str

    def to_dict(self, meta: dict = None) -> dict:
        d = {
            "steps": self.steps,
            "coverage": self.coverage,
            "total_distance": self.total_distance,
            "observed_count": len(self.final_observed),
            "stop_reason": self.stop_reason,
            "counts": list(self.trajectory.per_step_observed_counts),
            "poses": [
                {"position": list(p.position), "quaternion": list(p.quaternion)}
                for p in self.trajectory.poses
            ],
            "per_step": [dict(s) for s in self.per_step],
        }
        if meta:
            d.update(meta)
        return d

    def to_json(self, meta: dict = None) -> str:
        return json.dumps(self.to_dict(meta), sort_keys=True, indent=2)


def _pose_entry(pose: Pose) -> dict:
    return {"position": list(pose.position), "quaternion": list(pose.quaternion)}


def _sense_step(scene: SceneModel, pose: Pose, cfg: PlannerConfig, step: int):
    return sense(
        scene,
        pose,
        cfg.intrinsics,
        noise_sigma=cfg.noise_sigma,
        seed=cfg.seed * 1_000_003 + step,
        leaf=cfg.leaf,
        radius_scale=cfg.radius_scale,
        step=step,
    )


def run_episode(scene: SceneModel, start: Pose, predictor, cfg: PlannerConfig) -> EpisodeReport:
    """Closed loop: sense, integrate, predict, generate candidates, select, move.

    Terminates on the stop ratio, zero gain, or max_steps. Deterministic per
    (scene, start, predictor, cfg.seed).
    """
    obs = _sense_step(scene, start, cfg, 0)
    if obs.cloud.is_empty:
        raise StartVisibilityError("object not visible from the start pose")
    union = obs.cloud
    predicted = predictor.predict(union)
    stats = cloud_stats(predicted)
    grid = OccupancyGrid.create(stats.centroid, 2.2 * max(stats.d_max, 1.0), cfg.grid_resolution)
    integrate(grid, obs, scene.obstacles)

    poses = [start]
    counts = [len(union)]
    per_step = []
    total = 0.0
    current = start
    stop_reason = "max_steps"
    for t in range(1, cfg.max_steps + 1):
        cand = generate_candidates(predicted, cfg)
        valid = tuple(
            p for p in cand.poses if valid_sensing_position(scene, p.position, cfg.intrinsics)
        )
        if not valid:
            stop_reason = "no_valid_candidates"
            break
        try:
            sel = select_nbv(
                CandidateSet(valid, cand.source_stats), current, predicted, union, grid, cfg, step=t
            )
        except ZeroGainError:
            stop_reason = "zero_gain"
            break
        total += sel.path.length
        current = sel.pose
        poses.append(sel.pose)
        obs = _sense_step(scene, sel.pose, cfg, t)
        integrate(grid, obs, scene.obstacles)
        if not obs.cloud.is_empty:
            union = voxel_filter(merge(union, obs.cloud), cfg.leaf)
        prev = counts[-1]
        counts.append(len(union))
        per_step.append(
            {
                "step": t,
                **_pose_entry(sel.pose),
                "info_gain": sel.gain,
                "max_gain": sel.max_gain,
                "path_length": sel.path.length,
                "coverage": coverage(union, scene.object, cfg.coverage_tol),
                "observed_count": len(union),
                "fallback": sel.fallback,
            }
        )
        if should_stop(prev, counts[-1], cfg):
            stop_reason = "stop_ratio"
            break
        predicted = predictor.predict(union)

    return EpisodeReport(
        trajectory=Trajectory(tuple(poses), total, tuple(counts)),
        final_observed=union,
        coverage=coverage(union, scene.object, cfg.coverage_tol),
        total_distance=total,
        steps=len(poses) - 1,
        per_step=tuple(per_step),
        stop_reason=stop_reason,
    )


@dataclass(frozen=True)
class BaselineSelection:
    pose: Pose
    path: Path
    fallback: bool = False


def _nearest_free_cell(grid: OccupancyGrid, target: np.ndarray, centers_ok=None) -> np.ndarray:
    """Center of the free cell nearest the target position."""
    free = np.argwhere(grid.cells == FREE)
    if free.shape[0] == 0:
        raise ExplorationCompleteError("no free space to stand in")
    centers = grid.origin + (free + 0.5) * grid.resolution
    if centers_ok is not None:
        centers = centers[centers_ok(centers)]  # vectorized admissibility mask
        if centers.shape[0] == 0:
            raise ExplorationCompleteError("no admissible free cell near the frontier")
    d = np.linalg.norm(centers - target, axis=1)
    return centers[int(np.argmin(d))]


def baseline_select(
    grid: OccupancyGrid,
    observed: PointCloud,
    current: Pose,
    cfg: PlannerConfig,
    step: int = 0,
    centers_ok=None,
) -> BaselineSelection:
    """Frontier policy: biggest cluster biased toward the object, at a standoff.

    Cluster score = size / (1 + distance to observed centroid). The selected
    frontier maps to a sensing position 1.5 * d_max from the observed centroid
    along the centroid-to-frontier ray, snapped to the nearest free cell.
    """
    clusters = frontier_clusters(grid)
    if not clusters:
        raise ExplorationCompleteError("no frontiers remain")
    stats = cloud_stats(observed)
    ranked = sorted(
        range(len(clusters)),
        key=lambda i: (-clusters[i][1] / (1.0 + np.linalg.norm(clusters[i][0] - stats.centroid)), i),
    )
    standoff = BASELINE_STANDOFF_FACTOR * max(stats.d_max, grid.resolution)
    best_fallback = None
    for rank, i in enumerate(ranked):
        centroid_to_frontier = clusters[i][0] - stats.centroid
        norm = np.linalg.norm(centroid_to_frontier)
        direction = centroid_to_frontier / norm if norm > 1e-12 else np.array([1.0, 0.0, 0.0])
        target = stats.centroid + standoff * direction
        try:
            position = _nearest_free_cell(grid, target, centers_ok)
        except ExplorationCompleteError:
            if rank == len(ranked) - 1 and best_fallback is None:
                raise
            continue
        pose = look_at(position, stats.centroid)
        if cfg.distance_mode == "euclidean":
            return BaselineSelection(pose, _straight_path(current.position, position))
        if best_fallback is None:
            best_fallback = pose
        params = RRTParams(
            step=cfg.rrt_step, max_iters=cfg.rrt_max_iters, seed=_rrt_seed(cfg, step, i)
        )
        try:
            path = rrt_connect(current.position, position, grid, params)
        except (NoPathError, InvalidEndpointError):
            continue
        return BaselineSelection(pose, path)
    # every ranked frontier was unreachable; move in a straight line to the best one
    pose = best_fallback
    return BaselineSelection(pose, _straight_path(current.position, pose.position), fallback=True)


def run_baseline_episode(scene: SceneModel, start: Pose, cfg: PlannerConfig) -> EpisodeReport:
    """Frontier-driven exploration with the same sensing and stopping machinery."""
    obs = _sense_step(scene, start, cfg, 0)
    if obs.cloud.is_empty:
        raise StartVisibilityError("object not visible from the start pose")
    union = obs.cloud
    stats = cloud_stats(union)
    grid = OccupancyGrid.create(stats.centroid, 3.0 * max(stats.d_max, 1.0), cfg.grid_resolution)
    integrate(grid, obs, scene.obstacles)

    boxes = (bounding_box(scene.object).inflated(cfg.intrinsics.min_range),) + scene.obstacles

    def centers_ok(centers):
        bad = np.zeros(centers.shape[0], dtype=bool)
        for box in boxes:
            bad |= box.contains(centers)
        return ~bad

    poses = [start]
    counts = [len(union)]
    per_step = []
    total = 0.0
    current = start
    stop_reason = "max_steps"
    for t in range(1, cfg.max_steps + 1):
        try:
            sel = baseline_select(grid, union, current, cfg, step=t, centers_ok=centers_ok)
        except ExplorationCompleteError:
            stop_reason = "exploration_complete"
            break
        total += sel.path.length
        current = sel.pose
        poses.append(sel.pose)
        obs = _sense_step(scene, sel.pose, cfg, t)
        integrate(grid, obs, scene.obstacles)
        if not obs.cloud.is_empty:
            union = voxel_filter(merge(union, obs.cloud), cfg.leaf)
        prev = counts[-1]
        counts.append(len(union))
        per_step.append(
            {
                "step": t,
                **_pose_entry(sel.pose),
                "info_gain": counts[-1] - prev,  # baseline has no prediction; report count growth
                "max_gain": counts[-1] - prev,
                "path_length": sel.path.length,
                "coverage": coverage(union, scene.object, cfg.coverage_tol),
                "observed_count": len(union),
                "fallback": sel.fallback,
            }
        )
        if should_stop(prev, counts[-1], cfg):
            stop_reason = "stop_ratio"
            break

    return EpisodeReport(
        trajectory=Trajectory(tuple(poses), total, tuple(counts)),
        final_observed=union,
        coverage=coverage(union, scene.object, cfg.coverage_tol),
        total_distance=total,
        steps=len(poses) - 1,
        per_step=tuple(per_step),
        stop_reason=stop_reason,
    )
