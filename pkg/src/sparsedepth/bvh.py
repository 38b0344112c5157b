"""Median-split BVH over triangle centroids and ray casting against it.

The traversal kernels are numba-compiled and release the GIL so frame
rendering can run on a thread pool. ``ray_cast_brute`` is a separate,
vectorized all-triangles path kept as an independent cross-check; both
routes use the same intersection constants so their results are comparable.

Intersection rule constants:

- hits require t > 1e-6 m (bias against self-intersection at meter scale)
- barycentric bounds are inclusive with a 1e-9 slack so rays crossing a
  shared edge cannot fall through the seam
- two hits within 1e-9 of each other count as a tie, resolved to the lower
  triangle index with the smaller of the tied distances
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidInputError
from .mesh import TriangleMesh

T_MIN = 1e-6
BARY_EPS = 1e-9
TIE_EPS = 1e-9
DET_EPS = 1e-12
LEAF_SIZE = 4

_STACK_DEPTH = 128
_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Bvh:
    """Flat BVH. Leaves reference a contiguous slice of ``tri_order``.

    Triangle corner positions are snapshotted at build time (va/vb/vc, in the
    mesh's original triangle order) so traversal needs no gather per call.
    """

    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    tri_order: np.ndarray
    va: np.ndarray
    vb: np.ndarray
    vc: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.node_min.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.node_left[node] < 0


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Median-split BVH on triangle centroids, widest axis first."""
    corners = mesh.vertices[mesh.triangles]
    tri_min = corners.min(axis=1)
    tri_max = corners.max(axis=1)
    centroids = corners.mean(axis=1)

    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    node_left: list[int] = []
    node_right: list[int] = []
    node_start: list[int] = []
    node_count: list[int] = []
    order = np.arange(mesh.n_triangles, dtype=np.int64)

    def build(lo: int, hi: int) -> int:
        node = len(node_min)
        members = order[lo:hi]
        node_min.append(tri_min[members].min(axis=0))
        node_max.append(tri_max[members].max(axis=0))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(lo)
        node_count.append(hi - lo)
        if hi - lo > leaf_size:
            cent = centroids[members]
            axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
            # stable sort keeps the permutation deterministic under ties
            order[lo:hi] = members[np.argsort(cent[:, axis], kind="stable")]
            mid = lo + (hi - lo) // 2
            left = build(lo, mid)
            right = build(mid, hi)
            node_left[node] = left
            node_right[node] = right
            node_start[node] = -1
            node_count[node] = 0
        return node

    build(0, mesh.n_triangles)
    return Bvh(
        node_min=np.array(node_min, dtype=np.float64),
        node_max=np.array(node_max, dtype=np.float64),
        node_left=np.array(node_left, dtype=np.int32),
        node_right=np.array(node_right, dtype=np.int32),
        node_start=np.array(node_start, dtype=np.int64),
        node_count=np.array(node_count, dtype=np.int64),
        tri_order=np.ascontiguousarray(order, dtype=np.int64),
        va=np.ascontiguousarray(corners[:, 0]),
        vb=np.ascontiguousarray(corners[:, 1]),
        vc=np.ascontiguousarray(corners[:, 2]),
    )


@njit(cache=True, nogil=True)
def _intersect_triangle(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Moller-Trumbore; returns t or -1.0 on miss."""
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -DET_EPS < det < DET_EPS:
        return -1.0
    inv = 1.0 / det
    sx = ox - ax
    sy = oy - ay
    sz = oz - az
    u = (sx * px + sy * py + sz * pz) * inv
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return -1.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= T_MIN:
        return -1.0
    return t


@njit(cache=True, nogil=True)
def _slab_entry(ox, oy, oz, dx, dy, dz, mnx, mny, mnz, mxx, mxy, mxz):
    """Ray/AABB entry distance, or +inf when the ray misses the box."""
    tmin = -np.inf
    tmax = np.inf
    for axis in range(3):
        if axis == 0:
            o, d, lo, hi = ox, dx, mnx, mxx
        elif axis == 1:
            o, d, lo, hi = oy, dy, mny, mxy
        else:
            o, d, lo, hi = oz, dz, mnz, mxz
        if d == 0.0:
            if o < lo or o > hi:
                return np.inf
        else:
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
            if tmin > tmax:
                return np.inf
    if tmax < T_MIN:
        return np.inf
    return tmin


@njit(cache=True, nogil=True)
def _traverse(
    node_min,
    node_max,
    node_left,
    node_right,
    node_start,
    node_count,
    tri_order,
    va,
    vb,
    vc,
    ox,
    oy,
    oz,
    dx,
    dy,
    dz,
):
    """Nearest hit as (t, original triangle index); (inf, -1) on miss."""
    best_t = np.inf
    best_i = -1
    stack = np.empty(_STACK_DEPTH, dtype=np.int32)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        entry = _slab_entry(
            ox, oy, oz, dx, dy, dz,
            node_min[node, 0], node_min[node, 1], node_min[node, 2],
            node_max[node, 0], node_max[node, 1], node_max[node, 2],
        )
        if entry > best_t + TIE_EPS:
            continue
        left = node_left[node]
        if left < 0:
            start = node_start[node]
            for k in range(node_count[node]):
                tri = tri_order[start + k]
                t = _intersect_triangle(
                    ox, oy, oz, dx, dy, dz,
                    va[tri, 0], va[tri, 1], va[tri, 2],
                    vb[tri, 0], vb[tri, 1], vb[tri, 2],
                    vc[tri, 0], vc[tri, 1], vc[tri, 2],
                )
                if t < 0.0:
                    continue
                if t < best_t - TIE_EPS:
                    best_t = t
                    best_i = tri
                elif t <= best_t + TIE_EPS:
                    if t < best_t:
                        best_t = t
                    if tri < best_i:
                        best_i = tri
        else:
            # push both children; near child on top so it is visited first
            right = node_right[node]
            e_l = _slab_entry(
                ox, oy, oz, dx, dy, dz,
                node_min[left, 0], node_min[left, 1], node_min[left, 2],
                node_max[left, 0], node_max[left, 1], node_max[left, 2],
            )
            e_r = _slab_entry(
                ox, oy, oz, dx, dy, dz,
                node_min[right, 0], node_min[right, 1], node_min[right, 2],
                node_max[right, 0], node_max[right, 1], node_max[right, 2],
            )
            if e_l <= e_r:
                near, far = left, right
            else:
                near, far = right, left
            stack[top] = far
            top += 1
            stack[top] = near
            top += 1
    return best_t, best_i


def ray_cast(bvh: Bvh, mesh: TriangleMesh, origin, direction) -> tuple[float, int] | None:
    """Nearest intersection with t > 1e-6 m, or None on a miss.

    The direction must be unit length within 1e-9.
    """
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(np.sqrt(d @ d) - 1.0) > _UNIT_TOL:
        raise InvalidInputError("ray direction must be unit length")
    if bvh.va.shape[0] != mesh.n_triangles:
        raise InvalidInputError("BVH was built for a different mesh")
    t, idx = _traverse(
        bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.node_start, bvh.node_count, bvh.tri_order,
        bvh.va, bvh.vb, bvh.vc,
        o[0], o[1], o[2], d[0], d[1], d[2],
    )
    if idx < 0:
        return None
    return float(t), int(idx)


def ray_cast_brute(mesh: TriangleMesh, origin, direction) -> tuple[float, int] | None:
    """Exhaustive all-triangles intersection with the same hit rules.

    Independent of the BVH path: plain vectorized numpy, used as its oracle.
    """
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(np.sqrt(d @ d) - 1.0) > _UNIT_TOL:
        raise InvalidInputError("ray direction must be unit length")
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    e1 = b - a
    e2 = c - a
    p = np.cross(np.broadcast_to(d, e2.shape), e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) >= DET_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - a
    u = np.einsum("ij,ij->i", s, p) * inv
    ok &= (u >= -BARY_EPS) & (u <= 1.0 + BARY_EPS)
    q = np.cross(s, e1)
    v = (q @ d) * inv
    ok &= (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
    t = np.einsum("ij,ij->i", e2, q) * inv
    ok &= t > T_MIN
    if not np.any(ok):
        return None
    hits = np.nonzero(ok)[0]
    t_hits = t[hits]
    t_best = t_hits.min()
    tied = hits[t_hits <= t_best + TIE_EPS]
    return float(t_best), int(tied.min())
