"""Triangle meshes: OBJ loading, saving, and procedural terrain generation.

Meshes live in the world frame (z up). The OBJ support is the minimal subset
used by the dataset pipeline: ``v`` and ``f`` records, comments, and fan
triangulation of polygonal faces; normals and texture coordinates are
ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, MeshParseError

_MIN_TRIANGLE_AREA = 1e-12  # m^2


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle soup with derived axis-aligned bounds."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidInputError("vertices must be (V, 3)")
        if t.ndim != 2 or t.shape[1] != 3 or t.shape[0] < 1:
            raise InvalidInputError("triangles must be (T, 3) with T >= 1")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("vertex coordinates must be finite")
        if t.min() < 0 or t.max() >= v.shape[0]:
            raise InvalidInputError("triangle index out of range")
        corners = v[t]
        cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        if np.any(areas <= _MIN_TRIANGLE_AREA):
            bad = int(np.argmin(areas))
            raise InvalidInputError(f"degenerate triangle at index {bad}")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(min, max) corners of the box around all referenced vertices."""
        used = self.vertices[np.unique(self.triangles)]
        return used.min(axis=0), used.max(axis=0)


def load_obj(path) -> TriangleMesh:
    """Load a TriangleMesh from a Wavefront OBJ file (``v``/``f`` subset)."""
    path = Path(path)
    vertices: list[list[float]] = []
    faces: list[tuple[int, list[int]]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshParseError(f"{path}:{line_no}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(p) for p in parts[1:4]])
                except ValueError as exc:
                    raise MeshParseError(f"{path}:{line_no}: bad vertex coordinate") from exc
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise MeshParseError(f"{path}:{line_no}: face needs >= 3 vertices")
                idx: list[int] = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshParseError(f"{path}:{line_no}: bad face index {token!r}") from exc
                    if i <= 0:
                        raise MeshParseError(
                            f"{path}:{line_no}: face indices must be positive 1-based"
                        )
                    idx.append(i - 1)
                faces.append((line_no, idx))
            # Other record types (vn, vt, o, g, s, usemtl, ...) are ignored.
    if not vertices or not faces:
        raise MeshParseError(f"{path}: mesh has no geometry")
    n_vertices = len(vertices)
    triangles: list[tuple[int, int, int]] = []
    for line_no, idx in faces:
        for i in idx:
            if i >= n_vertices:
                raise MeshParseError(
                    f"{path}:{line_no}: vertex index {i + 1} out of range "
                    f"(mesh has {n_vertices} vertices)"
                )
        for k in range(1, len(idx) - 1):  # fan triangulation
            triangles.append((idx[0], idx[k], idx[k + 1]))
    return TriangleMesh(np.array(vertices, dtype=np.float64), np.array(triangles, dtype=np.int64))


def save_obj(path, mesh: TriangleMesh) -> None:
    """Write a mesh as OBJ with 1-based face indices."""
    lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def procedural_terrain(
    n: int = 48,
    extent: float = 30.0,
    relief: float = 2.5,
    seed: int = 0,
) -> TriangleMesh:
    """Deterministic undulating terrain patch centered on the origin.

    Heights are a sum of a few random sinusoids, giving smooth hills with
    faceted shading that downstream corner detection can latch onto.
    """
    if n < 2:
        raise InvalidInputError("terrain grid needs n >= 2")
    rng = np.random.default_rng(seed)
    axis = np.linspace(-extent / 2.0, extent / 2.0, n)
    xs, ys = np.meshgrid(axis, axis)
    z = np.zeros_like(xs)
    for _ in range(5):
        freq = rng.uniform(0.03, 0.18, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
        amp = relief * rng.uniform(0.15, 0.5)
        z += amp * np.sin(2 * np.pi * freq[0] * xs + phase[0]) * np.cos(
            2 * np.pi * freq[1] * ys + phase[1]
        )
    vertices = np.stack([xs.ravel(), ys.ravel(), z.ravel()], axis=1)
    quads = []
    for j in range(n - 1):
        for i in range(n - 1):
            v00 = j * n + i
            v10 = j * n + i + 1
            v01 = (j + 1) * n + i
            v11 = (j + 1) * n + i + 1
            quads.append((v00, v10, v11))
            quads.append((v00, v11, v01))
    return TriangleMesh(vertices, np.array(quads, dtype=np.int64))
