"""Shape completion predictors and the curriculum perturbation generator.

Built-in predictors keep the planner testable without any learned model:
oracle (ground truth), noisy oracle (dropout + jitter), and mirror (best
PCA symmetry plane). The external predictor speaks the wire protocol to a
model server over TCP or a child process's stdio.
"""

from __future__ import annotations

import os
import select
import shlex
import socket
import subprocess
import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .errors import EmptyCloudError, ParameterError, PredictorUnavailableError, ProtocolError
from .geometry import PointCloud, cloud_stats, voxel_filter
from .wire import encode_frame, points_from_wire, points_to_wire, read_frame


@dataclass(frozen=True)
class PerturbationLevel:
    max_rotation: float  # degrees
    max_translation: float  # fraction of d_max

    def __post_init__(self):
        if not (0 <= self.max_rotation <= 360):
            raise ParameterError(f"max_rotation must be in [0, 360], got {self.max_rotation}")
        if self.max_translation < 0:
            raise ParameterError(f"max_translation must be >= 0, got {self.max_translation}")


@dataclass(frozen=True)
class CurriculumSchedule:
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        for prev, cur in zip(levels, levels[1:]):
            if cur.max_rotation < prev.max_rotation or cur.max_translation < prev.max_translation:
                raise ParameterError(
                    f"schedule difficulty regresses: {prev} -> {cur}"
                )
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> PerturbationLevel:
        return self.levels[i]


_DEFAULT_LEVELS = (
    (25.0, 0.0),
    (25.0, 0.1),
    (45.0, 0.1),
    (45.0, 0.25),
    (45.0, 0.5),
    (90.0, 0.5),
    (180.0, 0.5),
    (360.0, 0.5),
)


def default_schedule() -> CurriculumSchedule:
    """The eight easy-to-hard rotation/translation pairs used for training."""
    return CurriculumSchedule(tuple(PerturbationLevel(r, t) for r, t in _DEFAULT_LEVELS))


def perturb(cloud: PointCloud, level: PerturbationLevel, seed: int):
    """Random rigid motion bounded by the level: rotation about the centroid by
    up to max_rotation degrees, then translation up to max_translation * d_max.

    Returns (perturbed cloud, applied parameters); apply_inverse undoes it.
    """
    if cloud.is_empty:
        raise EmptyCloudError("perturb requires a non-empty cloud")
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.normal(size=3)
    axis = axis / np.linalg.norm(axis)
    angle_deg = float(rng.uniform(0.0, level.max_rotation))
    stats = cloud_stats(cloud)
    direction = rng.normal(size=3)
    while np.linalg.norm(direction) < 1e-12:
        direction = rng.normal(size=3)
    direction = direction / np.linalg.norm(direction)
    magnitude = float(rng.uniform(0.0, level.max_translation * stats.d_max))
    translation = direction * magnitude
    applied = {
        "rotation_axis": axis,
        "angle_deg": angle_deg,
        "translation": translation,
        "center": stats.centroid,
    }
    if angle_deg == 0.0 and magnitude == 0.0:
        return cloud, applied
    rot = Rotation.from_rotvec(axis * np.radians(angle_deg)).as_matrix()
    pts = (cloud.points - stats.centroid) @ rot.T + stats.centroid + translation
    return PointCloud(pts, cloud.frame), applied


def apply_inverse(cloud: PointCloud, applied: dict) -> PointCloud:
    rot = Rotation.from_rotvec(
        applied["rotation_axis"] * np.radians(applied["angle_deg"])
    ).as_matrix()
    pts = (cloud.points - applied["translation"] - applied["center"]) @ rot + applied["center"]
    return PointCloud(pts, cloud.frame)


def _require_observed(observed: PointCloud) -> PointCloud:
    if observed.is_empty:
        raise EmptyCloudError("predictor input cloud is empty")
    return observed


class OraclePredictor:
    """Returns the voxel-filtered ground truth; upper-bounds planner performance."""

    def __init__(self, ground_truth: PointCloud, leaf: float = 0.1):
        if ground_truth.is_empty:
            raise EmptyCloudError("oracle needs a non-empty ground truth")
        self._prediction = voxel_filter(ground_truth, leaf)

    def predict(self, observed: PointCloud) -> PointCloud:
        _require_observed(observed)
        return self._prediction


class NoisyOraclePredictor:
    """Oracle with seeded point dropout and Gaussian jitter."""

    def __init__(
        self,
        ground_truth: PointCloud,
        leaf: float = 0.1,
        dropout: float = 0.0,
        jitter: float = 0.0,
        seed: int = 0,
    ):
        if not (0 <= dropout < 1):
            raise ParameterError(f"dropout must be in [0, 1), got {dropout}")
        if jitter < 0:
            raise ParameterError(f"jitter must be >= 0, got {jitter}")
        if ground_truth.is_empty:
            raise EmptyCloudError("oracle needs a non-empty ground truth")
        self._base = voxel_filter(ground_truth, leaf)
        self._dropout = dropout
        self._jitter = jitter
        self._rng = np.random.default_rng(seed)

    def predict(self, observed: PointCloud) -> PointCloud:
        _require_observed(observed)
        pts = self._base.points
        if self._dropout > 0:
            keep = self._rng.uniform(size=pts.shape[0]) >= self._dropout
            if not keep.any():
                keep[0] = True
            pts = pts[keep]
        if self._jitter > 0:
            pts = pts + self._rng.normal(0.0, self._jitter, size=pts.shape)
        return PointCloud(pts, self._base.frame)


class MirrorPredictor:
    """Completes by reflecting the observation through its best symmetry plane.

    Candidate plane normals are the PCA axes (descending variance); 'auto'
    picks the one whose reflection lands closest onto the observation, scored
    by the one-sided mean nearest-neighbor distance. Output always contains
    the input points.
    """

    def __init__(self, axis="auto"):
        if axis != "auto" and axis not in (0, 1, 2):
            raise ParameterError(f"axis must be 'auto' or 0|1|2, got {axis!r}")
        self._axis = axis

    def predict(self, observed: PointCloud) -> PointCloud:
        _require_observed(observed)
        pts = observed.points
        center = pts.mean(axis=0)
        q = pts - center
        cov = q.T @ q / max(1, pts.shape[0])
        eigval, eigvec = np.linalg.eigh(cov)
        axes = eigvec[:, ::-1].T  # rows, descending variance
        if self._axis == "auto":
            candidates = range(3)
        else:
            candidates = [self._axis]
        best = None
        tree = cKDTree(pts)
        for i in candidates:
            normal = axes[i]
            reflected = pts - 2.0 * (q @ normal)[:, None] * normal
            score = float(tree.query(reflected, k=1)[0].mean())
            if best is None or score < best[0]:
                best = (score, reflected)
        return PointCloud(np.vstack([pts, best[1]]), observed.frame)


class ExternalPredictor:
    """Wire-protocol client for a completion server.

    Endpoints: "tcp://HOST:PORT" or "stdio:COMMAND ARGS..." (child process).
    One request in flight at a time; any transport or protocol failure raises
    PredictorUnavailableError and drops the connection.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        if timeout <= 0:
            raise ParameterError(f"timeout must be positive, got {timeout}")
        self._endpoint = endpoint
        self._timeout = timeout
        self._sock = None
        self._proc = None
        if endpoint.startswith("tcp://"):
            rest = endpoint[len("tcp://") :]
            host, _, port = rest.rpartition(":")
            if not host or not port.isdigit():
                raise ParameterError(f"bad tcp endpoint {endpoint!r}")
            self._target = (host, int(port))
            self._mode = "tcp"
        elif endpoint.startswith("stdio:"):
            cmd = shlex.split(endpoint[len("stdio:") :])
            if not cmd:
                raise ParameterError(f"bad stdio endpoint {endpoint!r}")
            self._target = cmd
            self._mode = "stdio"
        else:
            raise ParameterError(f"endpoint must start with tcp:// or stdio:, got {endpoint!r}")

    def _ensure_connected(self):
        if self._mode == "tcp":
            if self._sock is None:
                self._sock = socket.create_connection(self._target, timeout=self._timeout)
                self._sock.settimeout(self._timeout)
        else:
            if self._proc is None or self._proc.poll() is not None:
                self._proc = subprocess.Popen(
                    self._target, stdin=subprocess.PIPE, stdout=subprocess.PIPE
                )

    def _send(self, data: bytes):
        if self._mode == "tcp":
            self._sock.sendall(data)
        else:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()

    def _read(self, n: int) -> bytes:
        if self._mode == "tcp":
            return self._sock.recv(n)
        fd = self._proc.stdout.fileno()
        deadline = time.monotonic() + self._timeout
        remaining = deadline - time.monotonic()
        if remaining <= 0 or not select.select([fd], [], [], remaining)[0]:
            raise socket.timeout("stdio read timed out")
        return os.read(fd, n)

    def close(self):
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except Exception:
                pass
            self._proc = None

    def predict(self, observed: PointCloud) -> PointCloud:
        _require_observed(observed)
        request = encode_frame({"op": "predict", "points": points_to_wire(observed.points)})
        try:
            self._ensure_connected()
            self._send(request)
            response = read_frame(self._read)
        except (OSError, ValueError, ProtocolError) as exc:
            self.close()
            raise PredictorUnavailableError(f"external predictor failed: {exc}") from exc
        if "error" in response:
            raise PredictorUnavailableError(f"external predictor error: {response['error']}")
        try:
            pts = points_from_wire(response)
        except ProtocolError as exc:
            self.close()
            raise PredictorUnavailableError(str(exc)) from exc
        if pts.shape[0] == 0:
            raise PredictorUnavailableError("external predictor returned an empty cloud")
        return PointCloud(pts, observed.frame)


def make_predictor(spec: dict, ground_truth: PointCloud | None = None, leaf: float = 0.1):
    """Build a predictor from a config dict: {"kind": ..., ...}."""
    kind = spec.get("kind")
    if kind == "oracle":
        if ground_truth is None:
            raise ParameterError("oracle predictor needs scene ground truth")
        return OraclePredictor(ground_truth, leaf)
    if kind == "noisy_oracle":
        if ground_truth is None:
            raise ParameterError("noisy_oracle predictor needs scene ground truth")
        return NoisyOraclePredictor(
            ground_truth,
            leaf,
            dropout=float(spec.get("dropout", 0.0)),
            jitter=float(spec.get("jitter", 0.0)),
            seed=int(spec.get("seed", 0)),
        )
    if kind == "mirror":
        return MirrorPredictor(axis=spec.get("axis", "auto"))
    if kind == "external":
        if "endpoint" not in spec:
            raise ParameterError("external predictor needs an endpoint")
        return ExternalPredictor(spec["endpoint"], timeout=float(spec.get("timeout", 30.0)))
    raise ParameterError(f"unknown predictor kind {kind!r}")
