"""Indexed triangle meshes: OBJ loading, normalisation, and procedural test shapes."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNIT_MARGIN = 0.05


class MeshError(ValueError):
    pass


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (M, 3) int64

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3 or len(self.triangles) == 0:
            raise MeshError("mesh needs at least one triangle")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle index out of range")

    @property
    def corners(self) -> np.ndarray:
        """(M, 3, 3) triangle corner positions."""
        return self.vertices[self.triangles]

    @property
    def areas(self) -> np.ndarray:
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    @property
    def normals(self) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        used = self.vertices[np.unique(self.triangles)]
        return used.min(axis=0), used.max(axis=0)

    @property
    def bounding_radius(self) -> float:
        lo, hi = self.bbox
        center = 0.5 * (lo + hi)
        used = self.vertices[np.unique(self.triangles)]
        return float(np.linalg.norm(used - center, axis=1).max())

    def drop_degenerate(self, tol: float = 0.0) -> "TriangleMesh":
        keep = self.areas > tol
        if not np.any(keep):
            raise MeshError("mesh has no non-degenerate triangles")
        return TriangleMesh(self.vertices, self.triangles[keep])

    def normalized(self, margin: float = UNIT_MARGIN) -> "TriangleMesh":
        """Uniformly scale and translate so the mesh fits [margin, 1 - margin]^3, centred."""
        lo, hi = self.bbox
        extent = float((hi - lo).max())
        if extent <= 0:
            raise MeshError("mesh has zero extent")
        scale = (1.0 - 2.0 * margin) / extent
        center = 0.5 * (lo + hi)
        v = (self.vertices - center) * scale + 0.5
        return TriangleMesh(v, self.triangles)


def parse_obj(text: str) -> TriangleMesh:
    """Vertices and faces only; polygons are fan-triangulated, normals/texcoords ignored."""
    verts, tris = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
                if len(verts[-1]) != 3:
                    raise ValueError("vertex needs three coordinates")
            elif parts[0] == "f":
                idx = []
                for p in parts[1:]:
                    i = int(p.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise ValueError("face needs at least three vertices")
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
        except (ValueError, IndexError) as exc:
            raise MeshError(f"OBJ parse error on line {lineno}: {exc}") from None
    if not verts or not tris:
        raise MeshError("OBJ file contains no triangles")
    return TriangleMesh(np.array(verts), np.array(tris))


def load_mesh(path, normalize: bool = True) -> TriangleMesh:
    mesh = parse_obj(Path(path).read_text()).drop_degenerate()
    return mesh.normalized() if normalize else mesh


def save_obj(mesh: TriangleMesh, path):
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Subdivided icosahedron with vertices projected onto the sphere; outward winding."""
    t = (1.0 + 5.0**0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    v = [np.array(p, dtype=np.float64) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = v[a] + v[b]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    vertices = np.array(v) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(vertices, np.array(faces))


def unit_cube() -> TriangleMesh:
    """Axis-aligned [0, 1]^3 cube as 6 quads split into 12 triangles, outward winding."""
    v = np.array([[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)], dtype=np.float64)
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = [(q[0], q[k], q[k + 1]) for q in quads for k in (1, 2)]
    return TriangleMesh(v, np.array(tris))
