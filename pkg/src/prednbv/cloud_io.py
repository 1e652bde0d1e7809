"""ASCII PLY and XYZ point-cloud readers/writers. Round-trips are lossless."""

from __future__ import annotations

import os

import numpy as np

from .errors import CloudFormatError
from .geometry import WORLD, PointCloud


def write_ply(path, cloud: PointCloud) -> None:
    pts = cloud.points
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    # repr() gives shortest exact round-trip for float64
    for p in pts:
        lines.append(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_ply(path) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudFormatError(f"{path}: missing ply magic")
    n = None
    props = []
    body_start = None
    in_vertex = False
    for i, raw in enumerate(lines[1:], start=1):
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise CloudFormatError(f"{path}: only ascii ply supported")
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            body_start = i + 1
            break
    if n is None or body_start is None:
        raise CloudFormatError(f"{path}: incomplete ply header")
    if props[:3] != ["x", "y", "z"]:
        raise CloudFormatError(f"{path}: vertex properties must start with x y z, got {props}")
    rows = []
    for raw in lines[body_start : body_start + n]:
        tok = raw.split()
        if len(tok) < 3:
            raise CloudFormatError(f"{path}: short vertex row {raw!r}")
        try:
            rows.append([float(tok[0]), float(tok[1]), float(tok[2])])
        except ValueError as exc:
            raise CloudFormatError(f"{path}: bad vertex row {raw!r}") from exc
    if len(rows) != n:
        raise CloudFormatError(f"{path}: expected {n} vertices, found {len(rows)}")
    pts = np.array(rows, dtype=np.float64).reshape(len(rows), 3)
    if pts.size and not np.all(np.isfinite(pts)):
        raise CloudFormatError(f"{path}: non-finite vertex")
    return PointCloud(pts, WORLD)


def write_xyz(path, cloud: PointCloud) -> None:
    lines = [f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in cloud.points]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_xyz(path) -> PointCloud:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tok = raw.split()
            if not tok:
                continue
            if len(tok) < 3:
                raise CloudFormatError(f"{path}:{lineno}: expected 3 coordinates")
            try:
                rows.append([float(tok[0]), float(tok[1]), float(tok[2])])
            except ValueError as exc:
                raise CloudFormatError(f"{path}:{lineno}: bad coordinate") from exc
    pts = np.array(rows, dtype=np.float64).reshape(len(rows), 3)
    if pts.size and not np.all(np.isfinite(pts)):
        raise CloudFormatError(f"{path}: non-finite point")
    return PointCloud(pts, WORLD)


def load_cloud(path) -> PointCloud:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".ply":
        return read_ply(path)
    if ext == ".xyz":
        return read_xyz(path)
    raise CloudFormatError(f"{path}: unsupported extension {ext!r} (want .ply or .xyz)")


def save_cloud(path, cloud: PointCloud) -> None:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".ply":
        write_ply(path, cloud)
    elif ext == ".xyz":
        write_xyz(path, cloud)
    else:
        raise CloudFormatError(f"{path}: unsupported extension {ext!r} (want .ply or .xyz)")


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
