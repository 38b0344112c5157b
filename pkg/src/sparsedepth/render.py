"""Synthetic depth dataset generation: pose sampling and ray-cast rendering.

Frames are rendered by casting one primary ray per pixel center. The stored
value is z-depth (the hit point's z coordinate in the camera frame); misses
stay invalid. Alongside each depth map the generator writes a flat-shaded
grayscale proxy image (Lambertian shading from a fixed directional light)
that gives the sparse-measurement sampler corner structure to detect.

Pose sampling, world frame z-up:

1. draw (x, y) uniformly inside the mesh bounds shrunk by
   ``horizontal_margin`` of the extent on each side;
2. cast a ray straight down to find the surface height under (x, y),
   rejecting the draw when it misses (an error after 1000 consecutive
   rejections);
3. place the camera ``uniform[z_min, z_max]`` above the surface;
4. orient it nadir (optical axis along -z), tilt about the camera x then y
   axes by independent ``uniform[-theta_xy, theta_xy]`` angles, then yaw
   about gravity by ``uniform[0, 360)`` degrees.

The per-frame RNG is derived from (seed, frame_index), so generation is
byte-identical across runs and thread counts.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .bvh import Bvh, _traverse, build_bvh, ray_cast
from .errors import InvalidInputError
from .fileio import save_pose_json, write_pfm, write_pgm
from .geometry import WORLD_FROM_CAM, CameraIntrinsics, DepthMap, Pose
from .mesh import TriangleMesh, load_obj
from .seeding import derive_rng

NADIR_BASE = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])

LIGHT_DIR = np.array([0.35, 0.25, 0.9]) / np.linalg.norm([0.35, 0.25, 0.9])
AMBIENT = 0.15

_MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class PoseSamplerConfig:
    """Terrain-relative random pose sampling parameters."""

    n_frames: int = 10000
    z_min: float = 1.0
    z_max: float = 51.0
    theta_xy: float = 22.5
    seed: int = 0
    horizontal_margin: float = 0.05

    def __post_init__(self):
        if self.n_frames < 1:
            raise InvalidInputError("n_frames must be >= 1")
        if not (0 < self.z_min < self.z_max):
            raise InvalidInputError("require 0 < z_min < z_max")
        if not (0 <= self.theta_xy < 90):
            raise InvalidInputError("theta_xy must be in [0, 90) degrees")
        if not (0 <= self.horizontal_margin < 0.5):
            raise InvalidInputError("horizontal_margin must be in [0, 0.5)")


def _rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def attitude_matrix(tilt_x: float, tilt_y: float, yaw: float) -> np.ndarray:
    """world-from-camera rotation for the sampler's tilt/tilt/yaw composition."""
    return _rot_z(yaw) @ NADIR_BASE @ _rot_x(tilt_x) @ _rot_y(tilt_y)


def decompose_attitude(rotation: np.ndarray) -> tuple[float, float, float]:
    """Recover (tilt_x, tilt_y, yaw) radians from an attitude_matrix rotation."""
    r = np.asarray(rotation, dtype=np.float64)
    tilt_x = float(np.arcsin(np.clip(-r[2, 1], -1.0, 1.0)))
    tilt_y = float(np.arctan2(r[2, 0], -r[2, 2]))
    base = NADIR_BASE @ _rot_x(tilt_x) @ _rot_y(tilt_y)
    rz = r @ base.T
    yaw = float(np.arctan2(rz[1, 0], rz[0, 0])) % (2.0 * np.pi)
    return tilt_x, tilt_y, yaw


def surface_height(bvh: Bvh, mesh: TriangleMesh, x: float, y: float) -> float | None:
    """Height of the first surface hit casting straight down over (x, y)."""
    _, top = mesh.bounds
    origin_z = float(top[2]) + 1.0
    hit = ray_cast(bvh, mesh, (x, y, origin_z), (0.0, 0.0, -1.0))
    if hit is None:
        return None
    return origin_z - hit[0]


def sample_pose(
    cfg: PoseSamplerConfig, bvh: Bvh, mesh: TriangleMesh, rng: np.random.Generator
) -> Pose:
    """Draw one camera pose per the sampling procedure in the module docstring.

    RNG draw order per attempt: x, y, then (on surface hit) height,
    tilt_x, tilt_y, yaw.
    """
    lo, hi = mesh.bounds
    extent = hi - lo
    x0 = lo[0] + cfg.horizontal_margin * extent[0]
    x1 = hi[0] - cfg.horizontal_margin * extent[0]
    y0 = lo[1] + cfg.horizontal_margin * extent[1]
    y1 = hi[1] - cfg.horizontal_margin * extent[1]
    theta = np.deg2rad(cfg.theta_xy)
    for _ in range(_MAX_REJECTIONS):
        x = rng.uniform(x0, x1)
        y = rng.uniform(y0, y1)
        surface = surface_height(bvh, mesh, x, y)
        if surface is None:
            continue
        height = rng.uniform(cfg.z_min, cfg.z_max)
        tilt_x = rng.uniform(-theta, theta)
        tilt_y = rng.uniform(-theta, theta)
        yaw = rng.uniform(0.0, 2.0 * np.pi)
        rotation = attitude_matrix(tilt_x, tilt_y, yaw)
        return Pose(rotation, np.array([x, y, surface + height]), WORLD_FROM_CAM)
    raise RuntimeError(
        f"pose sampling failed: {_MAX_REJECTIONS} consecutive downward rays "
        "missed the mesh (no floor under the sampled region)"
    )


@njit(cache=True, nogil=True)
def _render_kernel(
    node_min, node_max, node_left, node_right, node_start, node_count,
    tri_order, va, vb, vc,
    fx, fy, cx, cy, width, height,
    r00, r01, r02, r10, r11, r12, r20, r21, r22,
    ox, oy, oz,
    out_depth, out_tri,
):
    for row in range(height):
        for col in range(width):
            dx = (col + 0.5 - cx) / fx
            dy = (row + 0.5 - cy) / fy
            norm = np.sqrt(dx * dx + dy * dy + 1.0)
            wx = (r00 * dx + r01 * dy + r02) / norm
            wy = (r10 * dx + r11 * dy + r12) / norm
            wz = (r20 * dx + r21 * dy + r22) / norm
            t, tri = _traverse(
                node_min, node_max, node_left, node_right, node_start,
                node_count, tri_order, va, vb, vc,
                ox, oy, oz, wx, wy, wz,
            )
            if tri < 0:
                out_depth[row, col] = 0.0
                out_tri[row, col] = -1
            else:
                out_depth[row, col] = t / norm
                out_tri[row, col] = tri


def _render_arrays(
    bvh: Bvh, intr: CameraIntrinsics, pose: Pose
) -> tuple[np.ndarray, np.ndarray]:
    wfc = pose.as_world_from_cam()
    r = wfc.rotation
    t = wfc.translation
    depth = np.zeros((intr.height, intr.width), dtype=np.float32)
    tri = np.full((intr.height, intr.width), -1, dtype=np.int64)
    _render_kernel(
        bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.node_start, bvh.node_count, bvh.tri_order, bvh.va, bvh.vb, bvh.vc,
        float(intr.fx), float(intr.fy), float(intr.cx), float(intr.cy),
        intr.width, intr.height,
        r[0, 0], r[0, 1], r[0, 2], r[1, 0], r[1, 1], r[1, 2],
        r[2, 0], r[2, 1], r[2, 2],
        t[0], t[1], t[2],
        depth, tri,
    )
    return depth, tri


def render_depth(bvh: Bvh, mesh: TriangleMesh, intr: CameraIntrinsics, pose: Pose) -> DepthMap:
    """Ray-cast a z-depth map, one primary ray per pixel center."""
    if bvh.va.shape[0] != mesh.n_triangles:
        raise InvalidInputError("BVH was built for a different mesh")
    depth, _ = _render_arrays(bvh, intr, pose)
    return DepthMap(depth)


def _face_normals(mesh: TriangleMesh) -> np.ndarray:
    corners = mesh.vertices[mesh.triangles]
    n = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _shade_proxy(
    tri: np.ndarray, normals: np.ndarray, intr: CameraIntrinsics, pose: Pose
) -> np.ndarray:
    """Flat Lambertian shading of a hit-triangle index map, 8-bit grayscale."""
    wfc = pose.as_world_from_cam()
    cols, rows = np.meshgrid(np.arange(intr.width), np.arange(intr.height))
    dx = (cols + 0.5 - intr.cx) / intr.fx
    dy = (rows + 0.5 - intr.cy) / intr.fy
    dirs = np.stack([dx, dy, np.ones_like(dx)], axis=-1) @ wfc.rotation.T
    hit = tri >= 0
    n = np.zeros((intr.height, intr.width, 3))
    n[hit] = normals[tri[hit]]
    # orient each face normal toward the camera
    facing = np.einsum("hwc,hwc->hw", n, dirs)
    n[facing > 0] *= -1.0
    lambert = np.clip(np.einsum("hwc,c->hw", n, LIGHT_DIR), 0.0, None)
    intensity = np.where(hit, AMBIENT + (1.0 - AMBIENT) * lambert, 0.0)
    return np.round(255.0 * np.clip(intensity, 0.0, 1.0)).astype(np.uint8)


def render_proxy_image(
    bvh: Bvh, mesh: TriangleMesh, intr: CameraIntrinsics, pose: Pose
) -> np.ndarray:
    """Render the grayscale proxy image for one pose."""
    _, tri = _render_arrays(bvh, intr, pose)
    return _shade_proxy(tri, _face_normals(mesh), intr, pose)


def generate_dataset(
    mesh_path,
    cfg: PoseSamplerConfig,
    intr: CameraIntrinsics,
    out_dir,
    threads: int = 1,
) -> Path:
    """Render cfg.n_frames (depth PFM, pose JSON, proxy PGM) triples.

    Returns the path of the manifest JSON listing every file plus the
    configuration. Generation is deterministic for a fixed seed.
    """
    mesh_path = Path(mesh_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh = load_obj(mesh_path)
    bvh = build_bvh(mesh)
    normals = _face_normals(mesh)

    def render_frame(index: int) -> dict[str, str]:
        rng = derive_rng(cfg.seed, index)
        pose = sample_pose(cfg, bvh, mesh, rng)
        depth, tri = _render_arrays(bvh, intr, pose)
        proxy = _shade_proxy(tri, normals, intr, pose)
        names = {
            "depth": f"depth_{index:06d}.pfm",
            "pose": f"pose_{index:06d}.json",
            "image": f"image_{index:06d}.pgm",
        }
        write_pfm(out_dir / names["depth"], depth)
        save_pose_json(out_dir / names["pose"], pose)
        write_pgm(out_dir / names["image"], proxy)
        return names

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = list(pool.map(render_frame, range(cfg.n_frames)))
    else:
        frames = [render_frame(i) for i in range(cfg.n_frames)]

    manifest = {
        "scene": mesh_path.stem,
        "seed": cfg.seed,
        "n_frames": cfg.n_frames,
        "intrinsics": {
            "fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
            "width": intr.width, "height": intr.height,
        },
        "frames": frames,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def timed_generate(
    mesh_path, cfg: PoseSamplerConfig, intr: CameraIntrinsics, out_dir, threads: int = 1
) -> tuple[Path, float]:
    """generate_dataset plus wall-clock seconds, for CLI reporting."""
    start = time.perf_counter()
    path = generate_dataset(mesh_path, cfg, intr, out_dir, threads=threads)
    return path, time.perf_counter() - start


__all__ = [
    "PoseSamplerConfig",
    "attitude_matrix",
    "decompose_attitude",
    "surface_height",
    "sample_pose",
    "render_depth",
    "render_proxy_image",
    "generate_dataset",
    "timed_generate",
]
