import numpy as np
import pytest

from sparsedepth.bvh import build_bvh
from sparsedepth.geometry import WORLD_FROM_CAM, CameraIntrinsics, Pose, TransformConfig
from sparsedepth.mesh import TriangleMesh, procedural_terrain


@pytest.fixture
def transform_cfg():
    return TransformConfig()


@pytest.fixture
def small_intr():
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=32.0, cy=24.0, width=64, height=48)


@pytest.fixture
def vga_intr():
    return CameraIntrinsics(fx=900.0, fy=900.0, cx=320.0, cy=240.0, width=640, height=480)


def nadir_pose(height: float) -> Pose:
    """Camera at (0, 0, height) looking straight down (world z up)."""
    rotation = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    return Pose(rotation, np.array([0.0, 0.0, height]), WORLD_FROM_CAM)


def big_plane(z: float = 0.0, half: float = 500.0) -> TriangleMesh:
    vertices = np.array(
        [[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]]
    )
    return TriangleMesh(vertices, np.array([[0, 1, 2], [0, 2, 3]]))


def random_triangle_soup(n: int, rng: np.random.Generator, extent: float = 10.0) -> TriangleMesh:
    """n random well-conditioned triangles inside a cube of side `extent`."""
    anchors = rng.uniform(-extent / 2, extent / 2, (n, 3))
    edges = rng.uniform(-1.0, 1.0, (n, 2, 3))
    vertices = np.concatenate(
        [anchors, anchors + edges[:, 0], anchors + edges[:, 1]], axis=0
    )
    triangles = np.stack([np.arange(n), np.arange(n) + n, np.arange(n) + 2 * n], axis=1)
    areas = 0.5 * np.linalg.norm(
        np.cross(edges[:, 0], edges[:, 1]), axis=1
    )
    keep = areas > 1e-6
    # remap kept triangles onto a compact vertex list
    tri = triangles[keep]
    used = np.unique(tri)
    remap = np.zeros(vertices.shape[0], dtype=np.int64)
    remap[used] = np.arange(used.size)
    return TriangleMesh(vertices[used], remap[tri])


@pytest.fixture(scope="session")
def terrain_and_bvh():
    mesh = procedural_terrain(n=40, extent=40.0, relief=2.5, seed=11)
    return mesh, build_bvh(mesh)
