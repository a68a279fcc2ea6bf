"""Ray-cast depth rendering with a triangle BVH.

The tree is a median-split BVH flattened into arrays so the traversal can
run inside numba kernels.  Closest-hit queries use Moller-Trumbore with
unnormalized camera-depth ray directions, so the returned ray parameter is
the camera-space z of the hit directly.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .geometry import CameraIntrinsics, CameraPose, TriMesh

_LEAF_SIZE = 4


class MeshBVH:
    """Flattened median-split BVH over a triangle soup."""

    def __init__(self, mesh: TriMesh):
        tri = mesh.triangles() if len(mesh) else np.zeros((0, 3, 3))
        self.n_tris = len(tri)
        if self.n_tris == 0:
            self.v0 = np.zeros((0, 3))
            self.e1 = np.zeros((0, 3))
            self.e2 = np.zeros((0, 3))
            self.node_min = np.zeros((1, 3))
            self.node_max = np.zeros((1, 3))
            self.node_left = np.array([-1], dtype=np.int64)
            self.node_right = np.array([-1], dtype=np.int64)
            self.node_start = np.array([0], dtype=np.int64)
            self.node_count = np.array([0], dtype=np.int64)
            return
        bb_min = tri.min(axis=1)
        bb_max = tri.max(axis=1)
        centroids = tri.mean(axis=1)

        order = np.arange(self.n_tris)
        node_min, node_max = [], []
        node_left, node_right = [], []
        node_start, node_count = [], []

        def build(lo: int, hi: int) -> int:
            idx = len(node_min)
            sel = order[lo:hi]
            node_min.append(bb_min[sel].min(axis=0))
            node_max.append(bb_max[sel].max(axis=0))
            node_left.append(-1)
            node_right.append(-1)
            node_start.append(lo)
            node_count.append(hi - lo)
            if hi - lo > _LEAF_SIZE:
                ext = node_max[idx] - node_min[idx]
                axis = int(np.argmax(ext))
                mid = (lo + hi) // 2
                part = np.argsort(centroids[order[lo:hi], axis], kind="stable")
                order[lo:hi] = order[lo:hi][part]
                node_count[idx] = 0
                node_left[idx] = build(lo, mid)
                node_right[idx] = build(mid, hi)
            return idx

        import sys

        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, 10000))
        try:
            build(0, self.n_tris)
        finally:
            sys.setrecursionlimit(old_limit)

        tri = tri[order]
        self.v0 = np.ascontiguousarray(tri[:, 0])
        self.e1 = np.ascontiguousarray(tri[:, 1] - tri[:, 0])
        self.e2 = np.ascontiguousarray(tri[:, 2] - tri[:, 0])
        self.node_min = np.ascontiguousarray(node_min)
        self.node_max = np.ascontiguousarray(node_max)
        self.node_left = np.array(node_left, dtype=np.int64)
        self.node_right = np.array(node_right, dtype=np.int64)
        self.node_start = np.array(node_start, dtype=np.int64)
        self.node_count = np.array(node_count, dtype=np.int64)

    def arrays(self):
        return (
            self.v0, self.e1, self.e2,
            self.node_min, self.node_max,
            self.node_left, self.node_right,
            self.node_start, self.node_count,
        )


@njit(cache=True, inline="always")
def _ray_box(omin, omax, o, inv_d):
    t0 = -np.inf
    t1 = np.inf
    for k in range(3):
        if inv_d[k] == np.inf or inv_d[k] == -np.inf:
            if o[k] < omin[k] or o[k] > omax[k]:
                return np.inf, -np.inf
        else:
            ta = (omin[k] - o[k]) * inv_d[k]
            tb = (omax[k] - o[k]) * inv_d[k]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    return t0, t1


@njit(cache=True)
def _closest_hit(o, d, v0, e1, e2, node_min, node_max, node_left, node_right, node_start, node_count):
    """Smallest positive ray parameter t with o + t*d on the mesh, else inf."""
    best = np.inf
    if len(v0) == 0:
        return best
    inv_d = np.empty(3)
    for k in range(3):
        inv_d[k] = 1.0 / d[k] if d[k] != 0.0 else np.inf
    stack = np.empty(128, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        t0, t1 = _ray_box(node_min[node], node_max[node], o, inv_d)
        if t0 > t1 or t1 < 0.0 or t0 > best:
            continue
        if node_left[node] < 0:
            start = node_start[node]
            for i in range(start, start + node_count[node]):
                # Moller-Trumbore
                px = d[1] * e2[i, 2] - d[2] * e2[i, 1]
                py = d[2] * e2[i, 0] - d[0] * e2[i, 2]
                pz = d[0] * e2[i, 1] - d[1] * e2[i, 0]
                det = e1[i, 0] * px + e1[i, 1] * py + e1[i, 2] * pz
                if abs(det) < 1e-14:
                    continue
                inv_det = 1.0 / det
                sx = o[0] - v0[i, 0]
                sy = o[1] - v0[i, 1]
                sz = o[2] - v0[i, 2]
                u = (sx * px + sy * py + sz * pz) * inv_det
                if u < 0.0 or u > 1.0:
                    continue
                qx = sy * e1[i, 2] - sz * e1[i, 1]
                qy = sz * e1[i, 0] - sx * e1[i, 2]
                qz = sx * e1[i, 1] - sy * e1[i, 0]
                v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv_det
                if v < 0.0 or u + v > 1.0:
                    continue
                t = (e2[i, 0] * qx + e2[i, 1] * qy + e2[i, 2] * qz) * inv_det
                if 1e-12 < t < best:
                    best = t
        else:
            stack[top] = node_left[node]
            top += 1
            stack[top] = node_right[node]
            top += 1
    return best


@njit(cache=True, parallel=True)
def _depth_kernel(out, origin, rot_t, fx, fy, cx, cy,
                  v0, e1, e2, node_min, node_max, node_left, node_right, node_start, node_count):
    height, width = out.shape
    for y in prange(height):
        d = np.empty(3)
        for x in range(width):
            ax = (x - cx) / fx
            ay = (y - cy) / fy
            # world direction with unit camera-space z: t equals depth
            d[0] = rot_t[0, 0] * ax + rot_t[0, 1] * ay + rot_t[0, 2]
            d[1] = rot_t[1, 0] * ax + rot_t[1, 1] * ay + rot_t[1, 2]
            d[2] = rot_t[2, 0] * ax + rot_t[2, 1] * ay + rot_t[2, 2]
            out[y, x] = _closest_hit(
                origin, d, v0, e1, e2, node_min, node_max, node_left, node_right, node_start, node_count
            )


@njit(cache=True, parallel=True)
def _coverage_kernel(out, origin, rot_t, fx, fy, cx, cy, ss,
                     v0, e1, e2, node_min, node_max, node_left, node_right, node_start, node_count):
    """Fraction of each pixel's area covered by the mesh (ss x ss samples).

    The pixel (x, y) spans [x - 0.5, x + 0.5]; subsamples are cell centers
    of that square, so ss = 1 reduces to point sampling at (x, y).
    """
    height, width = out.shape
    inv = 1.0 / ss
    for y in prange(height):
        d = np.empty(3)
        for x in range(width):
            hits = 0
            for sy in range(ss):
                oy = y - 0.5 + (sy + 0.5) * inv
                for sx in range(ss):
                    ox = x - 0.5 + (sx + 0.5) * inv
                    ax = (ox - cx) / fx
                    ay = (oy - cy) / fy
                    d[0] = rot_t[0, 0] * ax + rot_t[0, 1] * ay + rot_t[0, 2]
                    d[1] = rot_t[1, 0] * ax + rot_t[1, 1] * ay + rot_t[1, 2]
                    d[2] = rot_t[2, 0] * ax + rot_t[2, 1] * ay + rot_t[2, 2]
                    t = _closest_hit(origin, d, v0, e1, e2, node_min, node_max,
                                     node_left, node_right, node_start, node_count)
                    if t != np.inf:
                        hits += 1
            out[y, x] = hits * inv * inv


def render_depth_bvh(bvh: MeshBVH, cam: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """Per-pixel nearest-hit camera depth; +inf where the mesh is missed."""
    out = np.empty((cam.height, cam.width), dtype=np.float64)
    origin = np.ascontiguousarray(-pose.T, dtype=np.float64)
    rot_t = np.ascontiguousarray(pose.R.T, dtype=np.float64)
    _depth_kernel(out, origin, rot_t, cam.fx, cam.fy, cam.cx, cam.cy, *bvh.arrays())
    return out


def render_coverage_bvh(bvh: MeshBVH, cam: CameraIntrinsics, pose: CameraPose, ss: int) -> np.ndarray:
    """Per-pixel area coverage in [0, 1] with ss x ss supersampling."""
    out = np.empty((cam.height, cam.width), dtype=np.float64)
    origin = np.ascontiguousarray(-pose.T, dtype=np.float64)
    rot_t = np.ascontiguousarray(pose.R.T, dtype=np.float64)
    _coverage_kernel(out, origin, rot_t, cam.fx, cam.fy, cam.cx, cam.cy, ss, *bvh.arrays())
    return out


def ray_mesh_depth(bvh: MeshBVH, origin: np.ndarray, direction: np.ndarray) -> float:
    """Closest-hit parameter for a single world-space ray (direction units)."""
    o = np.ascontiguousarray(origin, dtype=np.float64)
    d = np.ascontiguousarray(direction, dtype=np.float64)
    return float(_closest_hit(o, d, *MeshBVH.arrays(bvh)))
