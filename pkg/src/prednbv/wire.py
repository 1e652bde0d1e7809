"""Length-prefixed JSON framing for the external predictor protocol.

Frame = 4-byte little-endian unsigned payload length, then UTF-8 JSON.
Requests look like {"op": "predict", "points": [[x, y, z], ...]}; responses
carry {"points": [...]} or {"error": "..."}.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ProtocolError

MAX_FRAME_BYTES = 64 * 1024 * 1024
_LEN = struct.Struct("<I")


def encode_frame(obj) -> bytes:
    payload = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds the {MAX_FRAME_BYTES} cap")
    return _LEN.pack(len(payload)) + payload


def read_exact(read, n: int) -> bytes:
    """Drain exactly n bytes from read(k) -> bytes; b'' means closed."""
    chunks = []
    got = 0
    while got < n:
        chunk = read(n - got)
        if not chunk:
            raise ProtocolError(f"stream closed after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(read):
    header = read_exact(read, _LEN.size)
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"declared frame length {length} exceeds the {MAX_FRAME_BYTES} cap")
    payload = read_exact(read, length)
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame payload is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError(f"frame payload must be a JSON object, got {type(obj).__name__}")
    return obj


def points_to_wire(points: np.ndarray) -> list:
    return [[float(x), float(y), float(z)] for x, y, z in np.asarray(points).reshape(-1, 3)]


def points_from_wire(obj) -> np.ndarray:
    if "points" not in obj:
        raise ProtocolError("response object lacks 'points'")
    raw = obj["points"]
    if not isinstance(raw, list):
        raise ProtocolError("'points' must be a list")
    try:
        pts = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"'points' is not numeric: {exc}") from exc
    if pts.size == 0:
        return pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ProtocolError(f"'points' must be n x 3, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ProtocolError("'points' contains non-finite values")
    return pts
