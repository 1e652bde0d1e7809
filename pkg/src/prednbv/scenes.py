"""Deterministic synthetic object suite and scene manifest I/O.

Ten shapes, each sampled as a dense surface cloud (>= 10000 points) and
normalized so the centroid sits at the origin and d_max equals 10 meters.
Manifests are JSON: {"name", "object_ply_path", "obstacles": [{"min", "max"}]}.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .cloud_io import read_ply, write_ply
from .errors import CloudFormatError, ParameterError
from .geometry import PointCloud, cloud_stats
from .sensor import AABB, SceneModel

SUITE_POINTS = 12000
TARGET_D_MAX = 10.0


def _sample_box(rng, n, center, half):
    center = np.asarray(center, float)
    half = np.asarray(half, float)
    hx, hy, hz = half
    areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-1, 1, size=(n, 2))
    pts = np.empty((n, 3))
    for f in range(6):
        m = face == f
        axis = f // 2
        sign = 1.0 if f % 2 == 0 else -1.0
        others = [a for a in range(3) if a != axis]
        pts[m, axis] = sign * half[axis]
        pts[m, others[0]] = u[m, 0] * half[others[0]]
        pts[m, others[1]] = u[m, 1] * half[others[1]]
    return pts + center


def _sample_sphere(rng, n, center, radius):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center, float) + radius * v


def _sample_cylinder(rng, n, center, radius, height):
    side = 2 * np.pi * radius * height
    cap = np.pi * radius**2
    which = rng.choice(3, size=n, p=np.array([side, cap, cap]) / (side + 2 * cap))
    th = rng.uniform(0, 2 * np.pi, n)
    pts = np.empty((n, 3))
    m = which == 0
    pts[m, 0] = radius * np.cos(th[m])
    pts[m, 1] = radius * np.sin(th[m])
    pts[m, 2] = rng.uniform(-height / 2, height / 2, m.sum())
    for w, z in ((1, height / 2), (2, -height / 2)):
        m = which == w
        r = radius * np.sqrt(rng.uniform(0, 1, m.sum()))
        pts[m, 0] = r * np.cos(th[m])
        pts[m, 1] = r * np.sin(th[m])
        pts[m, 2] = z
    return pts + np.asarray(center, float)


def _sample_cone(rng, n, center, radius, height):
    """Apex up at +height/2, base disk at -height/2."""
    slant = np.sqrt(radius**2 + height**2)
    lateral = np.pi * radius * slant
    base = np.pi * radius**2
    which = rng.choice(2, size=n, p=np.array([lateral, base]) / (lateral + base))
    th = rng.uniform(0, 2 * np.pi, n)
    pts = np.empty((n, 3))
    m = which == 0
    s = np.sqrt(rng.uniform(0, 1, m.sum()))  # fraction of the way from apex
    pts[m, 0] = radius * s * np.cos(th[m])
    pts[m, 1] = radius * s * np.sin(th[m])
    pts[m, 2] = height / 2 - s * height
    m = which == 1
    r = radius * np.sqrt(rng.uniform(0, 1, m.sum()))
    pts[m, 0] = r * np.cos(th[m])
    pts[m, 1] = r * np.sin(th[m])
    pts[m, 2] = -height / 2
    return pts + np.asarray(center, float)


def _sample_torus(rng, n, center, ring_radius, tube_radius):
    th = rng.uniform(0, 2 * np.pi, n)
    # rejection in the tube angle keeps the sampling area-uniform
    phi = np.empty(n)
    filled = 0
    while filled < n:
        cand = rng.uniform(0, 2 * np.pi, n)
        accept = rng.uniform(0, 1, n) <= (ring_radius + tube_radius * np.cos(cand)) / (
            ring_radius + tube_radius
        )
        take = cand[accept][: n - filled]
        phi[filled : filled + take.size] = take
        filled += take.size
    r = ring_radius + tube_radius * np.cos(phi)
    return np.asarray(center, float) + np.column_stack(
        [r * np.cos(th), r * np.sin(th), tube_radius * np.sin(phi)]
    )


def _multi(rng, n, parts):
    """Sample a union of primitives proportionally to the given weights."""
    weights = np.array([w for w, _ in parts], float)
    counts = np.floor(weights / weights.sum() * n).astype(int)
    counts[0] += n - counts.sum()
    return np.vstack([sampler(rng, c) for c, (_, sampler) in zip(counts, parts) if c > 0])


def _shape_sphere(rng, n):
    return _sample_sphere(rng, n, (0, 0, 0), 1.0)


def _shape_cube(rng, n):
    return _sample_box(rng, n, (0, 0, 0), (1, 1, 1))


def _shape_cylinder(rng, n):
    return _sample_cylinder(rng, n, (0, 0, 0), 0.6, 2.4)


def _shape_cone(rng, n):
    return _sample_cone(rng, n, (0, 0, 0), 0.9, 1.8)


def _shape_torus(rng, n):
    return _sample_torus(rng, n, (0, 0, 0), 1.0, 0.35)


def _shape_ellipsoid(rng, n):
    return _shape_sphere(rng, n) * np.array([1.3, 0.9, 0.6])


def _shape_plane_cross(rng, n):
    return _multi(
        rng,
        n,
        [
            (3.0, lambda r, c: _sample_box(r, c, (0, 0, 0), (1.5, 0.25, 0.25))),
            (2.5, lambda r, c: _sample_box(r, c, (0.2, 0, 0), (0.6, 1.8, 0.06))),
            (0.8, lambda r, c: _sample_box(r, c, (-1.3, 0, 0.35), (0.25, 0.06, 0.45))),
        ],
    )


def _shape_tower(rng, n):
    return _multi(
        rng,
        n,
        [
            (3.0, lambda r, c: _sample_box(r, c, (0, 0, -1.0), (0.8, 0.8, 0.5))),
            (2.4, lambda r, c: _sample_box(r, c, (0, 0, 0.1), (0.5, 0.5, 0.6))),
            (1.6, lambda r, c: _sample_box(r, c, (0, 0, 1.2), (0.3, 0.3, 0.5))),
        ],
    )


def _shape_table(rng, n):
    legs = [
        (0.5, (lambda dx, dy: lambda r, c: _sample_box(r, c, (dx, dy, -0.6), (0.08, 0.08, 0.6)))(dx, dy))
        for dx in (-1.0, 1.0)
        for dy in (-0.6, 0.6)
    ]
    return _multi(
        rng,
        n,
        [(4.0, lambda r, c: _sample_box(r, c, (0, 0, 0.08), (1.2, 0.8, 0.08)))] + legs,
    )


def _shape_rocket(rng, n):
    fins = [
        (
            0.5,
            (
                lambda ang: lambda r, c: _sample_box(
                    r,
                    c,
                    (0.55 * np.cos(ang), 0.55 * np.sin(ang), -1.0),
                    np.abs(
                        np.array([0.35 * np.cos(ang), 0.35 * np.sin(ang), 0.0])
                    )
                    + np.array([0.04, 0.04, 0.35]),
                )
            )(ang),
        )
        for ang in (0.0, 2 * np.pi / 3, 4 * np.pi / 3)
    ]
    return _multi(
        rng,
        n,
        [
            (4.0, lambda r, c: _sample_cylinder(r, c, (0, 0, -0.1), 0.4, 2.2)),
            (1.2, lambda r, c: _sample_cone(r, c, (0, 0, 1.4), 0.4, 0.8)),
        ]
        + fins,
    )


_SHAPES = {
    "sphere": _shape_sphere,
    "cube": _shape_cube,
    "cylinder": _shape_cylinder,
    "cone": _shape_cone,
    "torus": _shape_torus,
    "ellipsoid": _shape_ellipsoid,
    "plane_cross": _shape_plane_cross,
    "tower": _shape_tower,
    "table": _shape_table,
    "rocket": _shape_rocket,
}

SHAPE_NAMES = tuple(_SHAPES)

# mid-radius pillar obstacles for a couple of scenes: far enough from the
# candidate rings (1.2-1.5 * d_max) yet inside typical flight paths
_OBSTACLES = {
    "tower": [((6.0, -7.5, -4.0), (9.0, -4.5, 4.0))],
    "table": [((4.5, -9.0, -4.0), (7.5, -6.0, 4.0))],
}


def generate_object(name: str, seed: int, n: int = SUITE_POINTS) -> PointCloud:
    """Sampled surface cloud, centered at its centroid with d_max = 10 m."""
    if name not in _SHAPES:
        raise ParameterError(f"unknown shape {name!r}; choose from {sorted(_SHAPES)}")
    rng = np.random.default_rng([seed, list(_SHAPES).index(name)])
    pts = _SHAPES[name](rng, n)
    centered = pts - pts.mean(axis=0)
    d_max = np.linalg.norm(centered, axis=1).max()
    return PointCloud(centered * (TARGET_D_MAX / d_max))


def generate_scene(name: str, seed: int, n: int = SUITE_POINTS) -> SceneModel:
    obstacles = tuple(AABB(lo, hi) for lo, hi in _OBSTACLES.get(name, []))
    return SceneModel(generate_object(name, seed, n), obstacles, name)


def generate_suite(out_dir, seed: int, n: int = SUITE_POINTS) -> list:
    """Write the 10-shape suite; returns manifest paths in suite order."""
    os.makedirs(out_dir, exist_ok=True)
    manifests = []
    for name in SHAPE_NAMES:
        scene = generate_scene(name, seed, n)
        ply_name = f"{name}.ply"
        write_ply(os.path.join(out_dir, ply_name), scene.object)
        manifest = {
            "name": name,
            "object_ply_path": ply_name,
            "obstacles": [
                {"min": box.lo.tolist(), "max": box.hi.tolist()} for box in scene.obstacles
            ],
        }
        path = os.path.join(out_dir, f"{name}.json")
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
        manifests.append(path)
    return manifests


def load_scene(manifest_path) -> SceneModel:
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CloudFormatError(f"{manifest_path}: unreadable scene manifest: {exc}") from exc
    for key in ("name", "object_ply_path"):
        if key not in manifest:
            raise CloudFormatError(f"{manifest_path}: manifest missing {key!r}")
    ply = manifest["object_ply_path"]
    if not os.path.isabs(ply):
        ply = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), ply)
    cloud = read_ply(ply)
    obstacles = tuple(
        AABB(entry["min"], entry["max"]) for entry in manifest.get("obstacles", [])
    )
    return SceneModel(cloud, obstacles, manifest["name"])
