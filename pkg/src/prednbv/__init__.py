"""Prediction-driven next-best-view planning for 3D object reconstruction."""

from ._accel import NUMBA_ENABLED
from .geometry import (
    CloudStats,
    PointCloud,
    Pose,
    cloud_stats,
    look_at,
    merge,
    transform,
    voxel_filter,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "CloudStats",
    "PointCloud",
    "Pose",
    "cloud_stats",
    "look_at",
    "merge",
    "transform",
    "voxel_filter",
    "__version__",
]
