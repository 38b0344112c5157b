"""Pinhole camera model, depth rasters, and the sparse-depth value transform.

Conventions used throughout the package:

- Camera frame: x right, y down, z forward along the optical axis (OpenCV).
- World frame: z up; gravity points along -z.
- Pixel (u, v) = (column, row). Pixel (i, j) covers [i, i+1) x [j, j+1);
  its center is at (i + 0.5, j + 0.5).
- Depth means z-depth along the optical axis in meters, not euclidean ray
  length.
- Rasters are numpy arrays indexed [row, col]. A stored value of 0 marks an
  invalid pixel (never NaN), so depth files round-trip bit-exactly.

The sparse-depth value transform chain maps a metric depth ``d`` seen by a
camera with focal length ``f`` into the normalized inverse canonical domain::

    d_c   = (f_c / f) * d          canonical depth
    d_ci  = 1 / d_c                inverse canonical depth
    d_sci = d_min * d_ci           normalized to (0, 1]

Values whose canonical depth falls below ``d_min`` would encode above 1 and
are clamped to 1; callers can count clamps through a ClampStats accumulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

CAM_FROM_WORLD = "cam_from_world"
WORLD_FROM_CAM = "world_from_cam"

_ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics. Focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("image size must be positive")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise InvalidInputError("principal point must lie inside the image")

    @property
    def mean_focal(self) -> float:
        """Scalar focal length for the canonical transform: (fx + fy) / 2."""
        return 0.5 * (self.fx + self.fy)


@dataclass(frozen=True)
class Pose:
    """Rigid transform with an explicit frame tag.

    ``frame_tag`` says which way the transform maps points:
    ``cam_from_world`` applies p_cam = R p_world + t, ``world_from_cam`` the
    reverse. The rotation must be orthonormal with determinant +1.
    """

    rotation: np.ndarray
    translation: np.ndarray
    frame_tag: str

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise InvalidInputError("rotation must be 3x3")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise InvalidInputError("pose entries must be finite")
        if np.max(np.abs(r @ r.T - np.eye(3))) > _ROTATION_TOL:
            raise InvalidInputError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ROTATION_TOL:
            raise InvalidInputError("rotation determinant must be +1")
        if self.frame_tag not in (CAM_FROM_WORLD, WORLD_FROM_CAM):
            raise InvalidInputError(f"unknown frame tag {self.frame_tag!r}")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def inverse(self) -> "Pose":
        tag = WORLD_FROM_CAM if self.frame_tag == CAM_FROM_WORLD else CAM_FROM_WORLD
        return Pose(self.rotation.T, -self.rotation.T @ self.translation, tag)

    def as_cam_from_world(self) -> "Pose":
        return self if self.frame_tag == CAM_FROM_WORLD else self.inverse()

    def as_world_from_cam(self) -> "Pose":
        return self if self.frame_tag == WORLD_FROM_CAM else self.inverse()

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) or (3,) points by this pose."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


@dataclass(frozen=True)
class TransformConfig:
    """Parameters of the canonical depth transform."""

    f_c: float = 900.0
    d_min: float = 0.5
    d_max: float = 80.0

    def __post_init__(self):
        if self.f_c <= 0:
            raise InvalidInputError("f_c must be positive")
        if not (0 < self.d_min < self.d_max):
            raise InvalidInputError("require 0 < d_min < d_max")


@dataclass(frozen=True)
class DepthMap:
    """Dense z-depth raster in meters. A value of 0 marks an invalid pixel."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise InvalidInputError("depth raster must be 2-D")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidInputError("depth values must be finite and >= 0")
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def validity(self) -> np.ndarray:
        return self.values > 0

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.values))


@dataclass(frozen=True)
class PointCloud:
    """Points in meters, (N, 3), in the frame the producer documents."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("point coordinates must be finite")
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class ClampStats:
    """Mutable accumulator counting encode clamps. Owned by the caller."""

    n_clamped: int = 0
    n_total: int = 0

    def record(self, n_clamped: int, n_total: int) -> None:
        self.n_clamped += int(n_clamped)
        self.n_total += int(n_total)


def project(intr: CameraIntrinsics, p_cam) -> tuple[float, float, float] | None:
    """Project a camera-frame point to subpixel (u, v) and its z-depth.

    Returns None when the point is behind the camera (z <= 0) or projects
    outside [0, width) x [0, height).
    """
    x, y, z = (float(c) for c in np.asarray(p_cam, dtype=np.float64).reshape(3))
    if z <= 0:
        return None
    u = intr.fx * x / z + intr.cx
    v = intr.fy * y / z + intr.cy
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        return None
    return u, v, z


def unproject(intr: CameraIntrinsics, u: float, v: float, z: float) -> np.ndarray:
    """Camera-frame point for subpixel (u, v) at z-depth z."""
    if z <= 0:
        raise InvalidInputError("z must be positive")
    return np.array(
        [(u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z],
        dtype=np.float64,
    )


def depth_map_to_cloud(intr: CameraIntrinsics, pose: Pose, depth: DepthMap) -> PointCloud:
    """Unproject every valid pixel (at its center) into a world-frame cloud."""
    wfc = pose.as_world_from_cam()
    rows, cols = np.nonzero(depth.validity)
    z = depth.values[rows, cols].astype(np.float64)
    u = cols + 0.5
    v = rows + 0.5
    p_cam = np.stack(
        [(u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z], axis=1
    )
    return PointCloud(wfc.apply(p_cam))


def reproject_cloud(intr: CameraIntrinsics, pose: Pose, cloud: PointCloud) -> DepthMap:
    """Project a world-frame cloud into a depth raster, keeping the nearest z.

    Points falling in the same pixel are z-buffered: the stored depth is the
    minimum z among them. Pixels receiving no point stay invalid.
    """
    if len(cloud) == 0:
        return DepthMap(np.zeros((intr.height, intr.width), dtype=np.float32))
    cfw = pose.as_cam_from_world()
    p_cam = cfw.apply(cloud.points)
    z = p_cam[:, 2]
    front = z > 0
    buf = np.full((intr.height, intr.width), np.inf, dtype=np.float32)
    if np.any(front):
        zf = z[front]
        u = intr.fx * p_cam[front, 0] / zf + intr.cx
        v = intr.fy * p_cam[front, 1] / zf + intr.cy
        in_frame = (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
        cols = np.floor(u[in_frame]).astype(np.intp)
        rows = np.floor(v[in_frame]).astype(np.intp)
        np.minimum.at(buf, (rows, cols), zf[in_frame].astype(np.float32))
    values = np.where(np.isfinite(buf), buf, np.float32(0.0))
    return DepthMap(values)


def _positive_array(x, name: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidInputError(f"{name} must be positive and finite")
    return arr, arr.ndim == 0


def canonical_depth(d, f: float, cfg: TransformConfig):
    """Rescale depth from focal length f into the canonical camera: (f_c / f) * d.

    Accepts a scalar or an ndarray of depths; the return type matches.
    """
    arr, scalar = _positive_array(d, "depth")
    if f <= 0:
        raise InvalidInputError("focal length must be positive")
    out = (cfg.f_c / f) * arr
    return float(out) if scalar else out


def encode_sparse_value(d, f: float, cfg: TransformConfig, stats: ClampStats | None = None):
    """Map metric depth to the normalized inverse canonical domain (0, 1].

    Canonical depths below d_min would exceed 1 and are clamped to 1; when a
    ClampStats accumulator is passed, clamps are counted into it.
    """
    c = canonical_depth(d, f, cfg)
    arr = np.asarray(c, dtype=np.float64)
    clamped = arr < cfg.d_min
    out = np.where(clamped, 1.0, cfg.d_min / arr)
    if stats is not None:
        stats.record(np.count_nonzero(clamped), arr.size)
    return float(out) if np.ndim(d) == 0 else out


def decode_sparse_value(d_sci, f: float, cfg: TransformConfig):
    """Invert encode_sparse_value: d = d_min * f / (f_c * d_sci)."""
    arr, scalar = _positive_array(d_sci, "encoded value")
    if f <= 0:
        raise InvalidInputError("focal length must be positive")
    out = cfg.d_min * f / (cfg.f_c * arr)
    return float(out) if scalar else out
