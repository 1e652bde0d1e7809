import json
import shlex
import socket
import struct
import sys
import threading

import numpy as np
import pytest
from scipy.spatial import cKDTree

from prednbv.errors import (
    EmptyCloudError,
    ParameterError,
    PredictorUnavailableError,
)
from prednbv.geometry import PointCloud, voxel_filter
from prednbv.predictor import (
    CurriculumSchedule,
    ExternalPredictor,
    MirrorPredictor,
    NoisyOraclePredictor,
    OraclePredictor,
    PerturbationLevel,
    apply_inverse,
    default_schedule,
    make_predictor,
    perturb,
)

GOLDEN_LEVELS = [
    (25.0, 0.0),
    (25.0, 0.1),
    (45.0, 0.1),
    (45.0, 0.25),
    (45.0, 0.5),
    (90.0, 0.5),
    (180.0, 0.5),
    (360.0, 0.5),
]


def _blob(seed, n=300, scale=(3.0, 1.5, 0.6)):
    rng = np.random.default_rng(seed)
    return PointCloud(rng.normal(size=(n, 3)) * np.array(scale))


def test_default_schedule_golden():
    sched = default_schedule()
    assert len(sched) == 8
    got = [(lv.max_rotation, lv.max_translation) for lv in sched]
    assert got == GOLDEN_LEVELS


def test_schedule_rejects_difficulty_regression():
    with pytest.raises(ParameterError):
        CurriculumSchedule((PerturbationLevel(45, 0.2), PerturbationLevel(30, 0.2)))
    with pytest.raises(ParameterError):
        CurriculumSchedule((PerturbationLevel(45, 0.2), PerturbationLevel(45, 0.1)))
    sched = CurriculumSchedule((PerturbationLevel(10, 0.0), PerturbationLevel(10, 0.0)))
    assert sched[1].max_rotation == 10


def test_level_validation():
    with pytest.raises(ParameterError):
        PerturbationLevel(-1.0, 0.0)
    with pytest.raises(ParameterError):
        PerturbationLevel(361.0, 0.0)
    with pytest.raises(ParameterError):
        PerturbationLevel(10.0, -0.1)


def test_perturb_is_rigid_and_bounded():
    cloud = _blob(0)
    level = PerturbationLevel(90.0, 0.3)
    moved, applied = perturb(cloud, level, seed=3)
    # rigid: all pairwise distances preserved
    idx = np.random.default_rng(1).choice(len(cloud), size=(80, 2))
    d0 = np.linalg.norm(cloud.points[idx[:, 0]] - cloud.points[idx[:, 1]], axis=1)
    d1 = np.linalg.norm(moved.points[idx[:, 0]] - moved.points[idx[:, 1]], axis=1)
    assert np.allclose(d0, d1, atol=1e-9)
    assert 0.0 <= applied["angle_deg"] <= 90.0
    d_max = np.linalg.norm(cloud.points - cloud.points.mean(axis=0), axis=1).max()
    assert np.linalg.norm(applied["translation"]) <= 0.3 * d_max
    # rotation is about the centroid, so the centroid moves by the translation
    assert np.allclose(
        moved.points.mean(axis=0), cloud.points.mean(axis=0) + applied["translation"], atol=1e-9
    )


def test_perturb_deterministic_and_invertible():
    cloud = _blob(2)
    level = PerturbationLevel(180.0, 0.5)
    a, applied_a = perturb(cloud, level, seed=11)
    b, applied_b = perturb(cloud, level, seed=11)
    c, _ = perturb(cloud, level, seed=12)
    assert np.array_equal(a.points, b.points)
    assert applied_a["angle_deg"] == applied_b["angle_deg"]
    assert not np.array_equal(a.points, c.points)
    restored = apply_inverse(a, applied_a)
    assert np.allclose(restored.points, cloud.points, atol=1e-9)


def test_perturb_identity_level_is_exact():
    cloud = _blob(3)
    out, applied = perturb(cloud, PerturbationLevel(0.0, 0.0), seed=5)
    assert out.points is cloud.points
    assert applied["angle_deg"] == 0.0
    with pytest.raises(EmptyCloudError):
        perturb(PointCloud.empty(), PerturbationLevel(0.0, 0.0), seed=0)


def test_oracle_predictor_returns_filtered_truth():
    gt = _blob(4, n=2000)
    pred = OraclePredictor(gt, leaf=0.4)
    want = voxel_filter(gt, 0.4)
    for observed in (_blob(5, n=50), _blob(6, n=10)):
        out = pred.predict(observed)
        assert np.array_equal(out.points, want.points)
    with pytest.raises(EmptyCloudError):
        pred.predict(PointCloud.empty())


def test_noisy_oracle_zero_noise_equals_oracle():
    gt = _blob(7, n=1500)
    clean = OraclePredictor(gt, leaf=0.3).predict(_blob(8, n=20))
    noisy = NoisyOraclePredictor(gt, leaf=0.3, dropout=0.0, jitter=0.0, seed=99)
    assert np.array_equal(noisy.predict(_blob(8, n=20)).points, clean.points)


def test_noisy_oracle_dropout_and_jitter():
    gt = _blob(9, n=1500)
    base = voxel_filter(gt, 0.3)
    p = NoisyOraclePredictor(gt, leaf=0.3, dropout=0.4, jitter=0.02, seed=1)
    q = NoisyOraclePredictor(gt, leaf=0.3, dropout=0.4, jitter=0.02, seed=1)
    out1 = p.predict(_blob(10, n=30))
    out2 = p.predict(_blob(10, n=30))
    # one seeded stream per instance: call sequences replay across instances,
    # while consecutive calls on one instance draw fresh noise
    assert np.array_equal(out1.points, q.predict(_blob(10, n=30)).points)
    assert not np.array_equal(out1.points, out2.points)
    assert 0 < len(out1) < len(base)
    # every output point lies near some clean model point
    d, _ = cKDTree(base.points).query(out1.points, k=1)
    assert d.max() <= 0.02 * 6  # a few sigma
    with pytest.raises(ParameterError):
        NoisyOraclePredictor(gt, dropout=1.0)
    with pytest.raises(ParameterError):
        NoisyOraclePredictor(gt, jitter=-0.1)


def _pca_axes(pts):
    center = pts.mean(axis=0)
    q = pts - center
    cov = q.T @ q / max(1, pts.shape[0])
    _, eigvec = np.linalg.eigh(cov)
    return center, eigvec[:, ::-1].T


def test_mirror_keeps_input_and_doubles():
    obs = _blob(11, n=200)
    out = MirrorPredictor().predict(obs)
    assert len(out) == 2 * len(obs)
    assert np.array_equal(out.points[: len(obs)], obs.points)


def test_mirror_forced_axis_reflects_through_pca_plane():
    obs = _blob(12, n=250)  # anisotropic: distinct eigenvalues
    center, axes = _pca_axes(obs.points)
    for axis in (0, 1, 2):
        out = MirrorPredictor(axis=axis).predict(obs)
        normal = axes[axis]
        q = obs.points - center
        want = obs.points - 2.0 * (q @ normal)[:, None] * normal
        assert np.allclose(out.points[len(obs) :], want, atol=1e-9)


def test_mirror_auto_picks_best_scoring_axis():
    obs = _blob(13, n=220)
    tree = cKDTree(obs.points)
    outs, scores = [], []
    for axis in (0, 1, 2):
        out = MirrorPredictor(axis=axis).predict(obs)
        reflected = out.points[len(obs) :]
        scores.append(tree.query(reflected, k=1)[0].mean())
        outs.append(out)
    auto = MirrorPredictor(axis="auto").predict(obs)
    assert np.array_equal(auto.points, outs[int(np.argmin(scores))].points)


def test_mirror_recovers_exactly_symmetric_cloud():
    rng = np.random.default_rng(14)
    half = rng.uniform(0.2, 3.0, size=(150, 3))  # strictly x > 0
    full = np.vstack([half, half * np.array([-1.0, 1.0, 1.0])])
    obs = PointCloud(full)
    out = MirrorPredictor(axis="auto").predict(obs)
    pred_half = out.points[len(obs) :]
    d, _ = cKDTree(full).query(pred_half, k=1)
    assert d.max() <= 1e-9
    with pytest.raises(ParameterError):
        MirrorPredictor(axis=3)


def test_make_predictor_factory():
    gt = _blob(15, n=500)
    assert isinstance(make_predictor({"kind": "oracle"}, gt), OraclePredictor)
    assert isinstance(
        make_predictor({"kind": "noisy_oracle", "dropout": 0.1}, gt), NoisyOraclePredictor
    )
    assert isinstance(make_predictor({"kind": "mirror", "axis": 1}, None), MirrorPredictor)
    ext = make_predictor({"kind": "external", "endpoint": "tcp://localhost:1"}, None)
    assert isinstance(ext, ExternalPredictor)
    with pytest.raises(ParameterError):
        make_predictor({"kind": "oracle"}, None)
    with pytest.raises(ParameterError):
        make_predictor({"kind": "external"}, None)
    with pytest.raises(ParameterError):
        make_predictor({"kind": "banana"}, None)


class _TCPServer:
    """Single-connection frame server driven by a handler(dict) -> dict."""

    def __init__(self, handler):
        self.handler = handler
        self.sock = socket.socket()
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]
        self.requests = []
        self.thread = threading.Thread(target=self._serve, daemon=True)
        self.thread.start()

    def _serve(self):
        conn, _ = self.sock.accept()
        try:
            while True:
                header = b""
                while len(header) < 4:
                    chunk = conn.recv(4 - len(header))
                    if not chunk:
                        return
                    header += chunk
                n = struct.unpack("<I", header)[0]
                payload = b""
                while len(payload) < n:
                    chunk = conn.recv(n - len(payload))
                    if not chunk:
                        return
                    payload += chunk
                request = json.loads(payload)
                self.requests.append(request)
                body = json.dumps(self.handler(request)).encode()
                conn.sendall(struct.pack("<I", len(body)) + body)
        finally:
            conn.close()

    def close(self):
        self.sock.close()


def test_external_tcp_round_trip_and_persistence():
    def shift(req):
        pts = np.asarray(req["points"]) + np.array([1.0, 0.0, 0.0])
        return {"points": pts.tolist()}

    server = _TCPServer(shift)
    try:
        pred = ExternalPredictor(f"tcp://127.0.0.1:{server.port}")
        obs = _blob(16, n=40)
        out1 = pred.predict(obs)
        out2 = pred.predict(obs)  # same connection
        assert np.allclose(out1.points, obs.points + [1, 0, 0])
        assert np.array_equal(out1.points, out2.points)
        assert all(r["op"] == "predict" for r in server.requests)
        assert len(server.requests) == 2
        pred.close()
    finally:
        server.close()


def test_external_tcp_error_response():
    server = _TCPServer(lambda req: {"error": "model busted"})
    try:
        pred = ExternalPredictor(f"tcp://127.0.0.1:{server.port}")
        with pytest.raises(PredictorUnavailableError):
            pred.predict(_blob(17, n=5))
        pred.close()
    finally:
        server.close()


def test_external_tcp_empty_points_response():
    server = _TCPServer(lambda req: {"points": []})
    try:
        pred = ExternalPredictor(f"tcp://127.0.0.1:{server.port}")
        with pytest.raises(PredictorUnavailableError):
            pred.predict(_blob(18, n=5))
        pred.close()
    finally:
        server.close()


def test_external_connection_refused():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()  # nothing listens here now
    pred = ExternalPredictor(f"tcp://127.0.0.1:{port}", timeout=2.0)
    with pytest.raises(PredictorUnavailableError):
        pred.predict(_blob(19, n=5))


def test_external_endpoint_validation():
    with pytest.raises(ParameterError):
        ExternalPredictor("http://x:1")
    with pytest.raises(ParameterError):
        ExternalPredictor("tcp://nohost")
    with pytest.raises(ParameterError):
        ExternalPredictor("stdio:")
    with pytest.raises(ParameterError):
        ExternalPredictor("tcp://h:1", timeout=0.0)


_STDIO_ECHO = r"""
import json, struct, sys
while True:
    header = sys.stdin.buffer.read(4)
    if len(header) < 4:
        break
    n = struct.unpack("<I", header)[0]
    req = json.loads(sys.stdin.buffer.read(n))
    body = json.dumps({"points": req["points"]}).encode()
    sys.stdout.buffer.write(struct.pack("<I", len(body)) + body)
    sys.stdout.buffer.flush()
"""


def test_external_stdio_round_trip():
    endpoint = f"stdio:{shlex.quote(sys.executable)} -c {shlex.quote(_STDIO_ECHO)}"
    pred = ExternalPredictor(endpoint, timeout=10.0)
    try:
        obs = _blob(20, n=25)
        out1 = pred.predict(obs)
        out2 = pred.predict(obs)
        assert np.array_equal(out1.points, obs.points)
        assert np.array_equal(out2.points, obs.points)
    finally:
        pred.close()
