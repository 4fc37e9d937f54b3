"""Binary triangle BVH: median split on the longest centroid axis, leaves of at most 4."""
from __future__ import annotations

import numpy as np

from .._backend import kernels
from .mesh import TriangleMesh

LEAF_SIZE = 4


class Bvh:
    """Flattened node arrays plus triangles reordered to make leaves contiguous.

    ``count[k] > 0`` marks a leaf covering ``tris[start[k]:start[k] + count[k]]``;
    inner nodes point at ``left[k]`` and ``right[k]``.
    """

    def __init__(self, mesh: TriangleMesh, leaf_size: int = LEAF_SIZE):
        self.mesh = mesh
        corners = mesh.corners
        tmin, tmax = corners.min(axis=1), corners.max(axis=1)
        cent = corners.mean(axis=1)
        order = np.arange(len(corners))
        lo, hi, left, right, start, count = [], [], [], [], [], []

        def new_node():
            lo.append(None), hi.append(None), left.append(-1), right.append(-1)
            start.append(0), count.append(0)
            return len(lo) - 1

        stack = [(new_node(), 0, len(order))]
        while stack:
            node, s, e = stack.pop()
            ids = order[s:e]
            lo[node] = tmin[ids].min(axis=0)
            hi[node] = tmax[ids].max(axis=0)
            if e - s <= leaf_size:
                start[node], count[node] = s, e - s
                continue
            c = cent[ids]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            mid = (e - s) // 2
            part = np.argpartition(c[:, axis], mid, kind="introselect")
            order[s:e] = ids[part]
            a, b = new_node(), new_node()
            left[node], right[node] = a, b
            stack.append((b, s + mid, e))
            stack.append((a, s, s + mid))

        self.lo = np.ascontiguousarray(lo, dtype=np.float64)
        self.hi = np.ascontiguousarray(hi, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.start = np.asarray(start, dtype=np.int32)
        self.count = np.asarray(count, dtype=np.int32)
        self.tri_index = order
        self.tris = np.ascontiguousarray(corners[order].reshape(-1, 9))
        self.scene_lo, self.scene_hi = self.lo[0].copy(), self.hi[0].copy()

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    def _arrays(self):
        return self.lo, self.hi, self.left, self.right, self.start, self.count, self.tris

    def closest(self, points, n_threads: int = 1):
        """Returns ``(distance, triangle id in the mesh, nodes visited)`` per point."""
        q = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        n = len(q)
        dist = np.empty(n)
        tri = np.empty(n, dtype=np.int64)
        visits = np.empty(n, dtype=np.int32)
        kernels.bvh_closest(q, *self._arrays(), dist, tri, visits, n_threads)
        return dist, self.tri_index[tri], visits

    def ray_hits(self, origins, dirs, n_threads: int = 1) -> np.ndarray:
        o = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
        d = np.ascontiguousarray(np.atleast_2d(dirs), dtype=np.float64)
        out = np.empty(len(o), dtype=np.uint8)
        kernels.bvh_ray_hits(o, d, *self._arrays(), out, 1e-9, n_threads)
        return out.astype(bool)

    def stab_signs(self, points, dirs, offset: float, n_threads: int = 1) -> np.ndarray:
        q = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        d = np.ascontiguousarray(dirs, dtype=np.float64)
        if d.ndim == 2:
            d = np.ascontiguousarray(np.broadcast_to(d, (len(q),) + d.shape))
        out = np.empty(len(q), dtype=np.int8)
        kernels.bvh_stab_signs(q, d, float(offset), *self._arrays(), out, 1e-9, n_threads)
        return out


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> Bvh:
    return Bvh(mesh, leaf_size)


def unsigned_distance(bvh: Bvh, x, n_threads: int = 1):
    """Exact distance to the mesh and the closest triangle; scalar in, scalar out."""
    dist, tri, _ = bvh.closest(x, n_threads)
    if np.ndim(x) == 1:
        return float(dist[0]), int(tri[0])
    return dist, tri


def closest_points_on_triangles(p, a, b, c):
    """Vectorised closest point to ``p`` on triangles ``(a, b, c)``; all arrays (N, 3)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = np.einsum("ij,ij->i", ab, ap), np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3, d4 = np.einsum("ij,ij->i", ab, bp), np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5, d6 = np.einsum("ij,ij->i", ab, cp), np.einsum("ij,ij->i", ac, cp)
    va, vb, vc = d3 * d6 - d5 * d4, d5 * d2 - d1 * d6, d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        out = a + ab * (vb * denom)[:, None] + ac * (vc * denom)[:, None]
        e_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        on_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        out = np.where(on_bc[:, None], b + e_bc[:, None] * (c - b), out)
        on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        out = np.where(on_ac[:, None], a + (d2 / (d2 - d6))[:, None] * ac, out)
        at_c = (d6 >= 0) & (d5 <= d6)
        out = np.where(at_c[:, None], c, out)
        on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        out = np.where(on_ab[:, None], a + (d1 / (d1 - d3))[:, None] * ab, out)
        at_b = (d3 >= 0) & (d4 <= d3)
        out = np.where(at_b[:, None], b, out)
        at_a = (d1 <= 0) & (d2 <= 0)
        out = np.where(at_a[:, None], a, out)
    return out
