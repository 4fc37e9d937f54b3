"""Sparse surface octree over the unit cube, built from exact box/triangle overlap tests."""
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .bvh import Bvh
from .mesh import TriangleMesh

if TYPE_CHECKING:
    from ..pcg import PCG32

_CHILD = ((np.arange(8)[:, None] >> np.arange(3)[None, :]) & 1).astype(np.int64)


def _axis_project(axis, v0, v1, v2, half):
    """Separating-axis check on per-pair axes; True where the axis does NOT separate."""
    p0 = np.einsum("ij,ij->i", axis, v0)
    p1 = np.einsum("ij,ij->i", axis, v1)
    p2 = np.einsum("ij,ij->i", axis, v2)
    r = np.abs(axis) @ np.ones(3) * half
    lo = np.minimum(np.minimum(p0, p1), p2)
    hi = np.maximum(np.maximum(p0, p1), p2)
    return (lo <= r) & (hi >= -r)


def boxes_intersect_triangles(center, half, tris) -> np.ndarray:
    """Closed box/triangle overlap by the 13-axis separating axis test.

    ``center`` (P, 3), ``half`` (P,) half widths of cubes, ``tris`` (P, 3, 3).
    """
    v0 = tris[:, 0] - center
    v1 = tris[:, 1] - center
    v2 = tris[:, 2] - center
    ok = np.ones(len(center), dtype=bool)
    # box face normals
    for i in range(3):
        lo = np.minimum(np.minimum(v0[:, i], v1[:, i]), v2[:, i])
        hi = np.maximum(np.maximum(v0[:, i], v1[:, i]), v2[:, i])
        ok &= (lo <= half) & (hi >= -half)
    e0, e1, e2 = v1 - v0, v2 - v1, v0 - v2
    # triangle plane
    n = np.cross(e0, e1)
    d = np.einsum("ij,ij->i", n, v0)
    r = np.abs(n).sum(axis=1) * half
    ok &= np.abs(d) <= r
    # edge cross products
    eye = np.eye(3)
    for e in (e0, e1, e2):
        for i in range(3):
            ax = np.cross(np.broadcast_to(eye[i], e.shape), e)
            ok &= _axis_project(ax, v0, v1, v2, half)
    return ok


class SurfaceOctree:
    """Occupied voxels per level, stored as sorted linear keys.

    A level-``k`` voxel ``(x, y, z)`` has key ``x + (y << k) + (z << 2k)``;
    its lattice vertices use keys over ``(2**k + 1)^3``.
    """

    def __init__(self, levels: list[np.ndarray]):
        self.cells = levels  # per level: (n_k, 3) int64 cells, sorted by key
        self.max_level = len(levels) - 1
        self.keys = [self._cell_key(k, c) for k, c in enumerate(levels)]
        self._vkeys: dict[int, np.ndarray] = {}
        self._node_level = np.repeat(np.arange(len(levels)), [len(c) for c in levels])

    @staticmethod
    def _cell_key(k, cells):
        cells = np.asarray(cells, dtype=np.int64)
        return cells[:, 0] + (cells[:, 1] << k) + (cells[:, 2] << (2 * k))

    @staticmethod
    def _vertex_key(k, verts):
        s = (1 << k) + 1
        verts = np.asarray(verts, dtype=np.int64)
        return verts[:, 0] + s * (verts[:, 1] + s * verts[:, 2])

    def n_cells(self, k: int) -> int:
        return len(self.keys[k])

    @property
    def leaves(self) -> np.ndarray:
        return self.cells[self.max_level]

    @property
    def n_nodes(self) -> int:
        return len(self._node_level)

    def contains(self, k: int, cells) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.int64)
        inb = np.all((cells >= 0) & (cells < (1 << k)), axis=1)
        key = self._cell_key(k, np.clip(cells, 0, (1 << k) - 1))
        keys = self.keys[k]
        pos = np.minimum(np.searchsorted(keys, key), len(keys) - 1)
        return inb & (keys[pos] == key)

    def vertex_keys(self, k: int) -> np.ndarray:
        if k not in self._vkeys:
            verts = (self.cells[k][:, None, :] + _CHILD[None]).reshape(-1, 3)
            self._vkeys[k] = np.unique(self._vertex_key(k, verts))
        return self._vkeys[k]

    def n_vertices(self, k: int) -> int:
        return len(self.vertex_keys(k))

    def vertex_rows(self, k: int, verts) -> np.ndarray:
        vk = self.vertex_keys(k)
        key = self._vertex_key(k, verts)
        rows = np.searchsorted(vk, key)
        if np.any(rows >= len(vk)) or np.any(vk[np.minimum(rows, len(vk) - 1)] != key):
            raise KeyError("vertex does not belong to an occupied voxel")
        return rows

    def exterior_cells(self, k: int) -> np.ndarray:
        """(2^k,)*3 bool grid: empty cells connected to the cube boundary through empty cells."""
        n = 1 << k
        occ = np.zeros((n, n, n), dtype=bool)
        c = self.cells[k]
        occ[c[:, 0], c[:, 1], c[:, 2]] = True
        ext = np.zeros_like(occ)
        for ax in range(3):
            for side in (0, -1):
                sl = [slice(None)] * 3
                sl[ax] = side
                ext[tuple(sl)] |= ~occ[tuple(sl)]
        while True:
            grown = ext.copy()
            grown[1:] |= ext[:-1]
            grown[:-1] |= ext[1:]
            grown[:, 1:] |= ext[:, :-1]
            grown[:, :-1] |= ext[:, 1:]
            grown[:, :, 1:] |= ext[:, :, :-1]
            grown[:, :, :-1] |= ext[:, :, 1:]
            grown &= ~occ
            if np.array_equal(grown, ext):
                return ext
            ext = grown

    def node_is_leaf(self, node_ids) -> np.ndarray:
        return self._node_level[node_ids] == self.max_level

    def node_cell(self, node_ids):
        """Level and cell of flat node ids (levels concatenated coarse to fine)."""
        starts = np.concatenate([[0], np.cumsum([len(c) for c in self.cells])])
        lvl = self._node_level[node_ids]
        cells = np.empty((len(node_ids), 3), dtype=np.int64)
        for k in np.unique(lvl):
            sel = lvl == k
            cells[sel] = self.cells[k][node_ids[sel] - starts[k]]
        return lvl, cells


def build_surface_octree(mesh: TriangleMesh, bvh: Bvh, max_level: int = 10) -> SurfaceOctree:
    """Subdivide the unit cube, keeping voxels whose closed box touches a triangle."""
    tris = mesh.corners
    # level 0: the root box against every triangle
    hit = boxes_intersect_triangles(np.full((len(tris), 3), 0.5), np.full(len(tris), 0.5), tris)
    pair_cell = np.zeros(int(hit.sum()), dtype=np.int64)
    pair_tri = np.nonzero(hit)[0]
    cells = np.zeros((1 if len(pair_tri) else 0, 3), dtype=np.int64)
    levels = [cells]
    for k in range(1, max_level + 1):
        h = 1.0 / (1 << k)
        children = (cells[:, None, :] * 2 + _CHILD[None]).reshape(-1, 3)
        centers = (children + 0.5) * h
        # cheap reject: nearest surface point farther than the half diagonal
        dist, _, _ = bvh.closest(centers)
        near = dist <= 0.5 * h * np.sqrt(3.0) * (1 + 1e-9)
        keep_child = np.nonzero(near)[0]
        # expand (parent, tri) pairs to surviving children of that parent
        remap = -np.ones(len(children), dtype=np.int64)
        remap[keep_child] = np.arange(len(keep_child))
        pc, pt = pair_cell, pair_tri
        per_child = [np.nonzero(near[j::8])[0] for j in range(8)]
        ch_list, tr_list = [], []
        for j in range(8):
            ok_parent = np.zeros(len(cells), dtype=bool)
            ok_parent[per_child[j]] = True
            m = ok_parent[pc]
            ch_list.append(remap[pc[m] * 8 + j])
            tr_list.append(pt[m])
        ch = np.concatenate(ch_list)
        tr = np.concatenate(tr_list)
        kc = children[keep_child]
        inter = boxes_intersect_triangles((kc[ch] + 0.5) * h, np.full(len(ch), 0.5 * h), tris[tr])
        ch, tr = ch[inter], tr[inter]
        occ = np.unique(ch)
        new_cells = kc[occ]
        key = SurfaceOctree._cell_key(k, new_cells)
        srt = np.argsort(key)
        new_cells = new_cells[srt]
        # renumber pair cells into the sorted occupied list
        idx = -np.ones(len(kc), dtype=np.int64)
        idx[occ[srt]] = np.arange(len(occ))
        pair_cell, pair_tri = idx[ch], tr
        cells = new_cells
        levels.append(cells)
    return SurfaceOctree(levels)


def octree_sample_positions(octree: SurfaceOctree, n: int, rng: "PCG32") -> np.ndarray:
    """Uniform points in uniformly chosen leaves, by rejection over the array of all nodes."""
    if octree.n_nodes == 0:
        raise ValueError("empty octree")
    chosen = np.empty(0, dtype=np.int64)
    while len(chosen) < n:
        m = max(2 * (n - len(chosen)), 16)
        cand = rng.integers(octree.n_nodes, m)
        chosen = np.concatenate([chosen, cand[octree.node_is_leaf(cand)]])
    chosen = chosen[:n]
    _, cells = octree.node_cell(chosen)
    h = 1.0 / (1 << octree.max_level)
    return (cells + rng.random((n, 3))) * h
