"""Non-neural machinery for sparse-measurement depth completion.

Synthetic depth dataset rendering, sparse-measurement simulation, the
4-channel patch-embedding mechanism, training losses with verified gradients,
and the MAE/RMSE + average-rank evaluation bench.
"""

from .errors import ConfigError, FitError, InvalidInputError, MeshParseError
from .geometry import (
    CAM_FROM_WORLD,
    WORLD_FROM_CAM,
    CameraIntrinsics,
    ClampStats,
    DepthMap,
    PointCloud,
    Pose,
    TransformConfig,
    canonical_depth,
    decode_sparse_value,
    depth_map_to_cloud,
    encode_sparse_value,
    project,
    reproject_cloud,
    unproject,
)

__version__ = "0.1.0"

__all__ = [
    "CAM_FROM_WORLD",
    "WORLD_FROM_CAM",
    "CameraIntrinsics",
    "ClampStats",
    "ConfigError",
    "DepthMap",
    "FitError",
    "InvalidInputError",
    "MeshParseError",
    "PointCloud",
    "Pose",
    "TransformConfig",
    "canonical_depth",
    "decode_sparse_value",
    "depth_map_to_cloud",
    "encode_sparse_value",
    "project",
    "reproject_cloud",
    "unproject",
]
