"""SDF training data: surface/volume sampling, logistic perturbation, stab-ray signing."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..pcg import PCG32
from .bvh import Bvh, closest_points_on_triangles
from .mesh import TriangleMesh

UNIFORM, SURFACE, PERTURBED = 0, 1, 2
N_STAB_RAYS = 32
RAY_OFFSET = 1e-6  # times the bounding radius
# points this close to the surface keep sign +1; the sign cannot move their target further
ON_SURFACE = 1e-10


@dataclass
class AreaCdf:
    cdf: np.ndarray  # (M,) normalised cumulative areas, last entry 1

    def select(self, u: np.ndarray) -> np.ndarray:
        """Triangle ids for uniforms ``u`` in [0, 1) by binary search."""
        return np.minimum(np.searchsorted(self.cdf, u, side="right"), len(self.cdf) - 1)


def build_area_cdf(mesh: TriangleMesh) -> AreaCdf:
    areas = mesh.areas
    cdf = np.cumsum(areas) / areas.sum()
    cdf[-1] = 1.0
    return AreaCdf(cdf)


def sample_surface(mesh: TriangleMesh, cdf: AreaCdf, n: int, rng: PCG32):
    """Area-proportional triangle choice, then the square-root warp onto the triangle."""
    tri = cdf.select(rng.random(n))
    u = rng.random((n, 2))
    su = np.sqrt(u[:, 0])
    b0 = 1.0 - su
    b1 = u[:, 1] * su
    c = mesh.corners[tri]
    pts = b0[:, None] * c[:, 0] + b1[:, None] * c[:, 1] + (1.0 - b0 - b1)[:, None] * c[:, 2]
    return pts, tri


def logistic_scale(target_std: float) -> float:
    return target_std * math.sqrt(3.0) / math.pi


def logistic_from_uniform(u, target_std: float):
    """Inverse CDF of the zero-mean logistic distribution with the given standard deviation."""
    u = np.asarray(u, dtype=np.float64)
    return logistic_scale(target_std) * np.log(u / (1.0 - u))


def logistic_noise(rng: PCG32, target_std: float, size=None):
    if target_std <= 0:
        raise ValueError("target_std must be positive")
    if size is None:
        return float(logistic_from_uniform(rng.random_open(1), target_std)[0])
    return logistic_from_uniform(rng.random_open(size), target_std)


_GOLDEN = (1.0 + 5.0**0.5) / 2.0


def fibonacci_lattice(n: int) -> np.ndarray:
    """``n`` near-uniform unit vectors on a spherical Fibonacci spiral."""
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = 2.0 * math.pi * i / _GOLDEN
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def random_rotations(rng: PCG32, count: int) -> np.ndarray:
    """(count, 3, 3) uniformly distributed rotation matrices from random unit quaternions."""
    u = rng.random((count, 3))
    s1, s2 = np.sqrt(1.0 - u[:, 0]), np.sqrt(u[:, 0])
    a1, a2 = 2.0 * math.pi * u[:, 1], 2.0 * math.pi * u[:, 2]
    w, x, y, z = s2 * np.cos(a2), s1 * np.sin(a1), s1 * np.cos(a1), s2 * np.sin(a2)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], axis=1),
        np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], axis=1),
        np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], axis=1),
    ], axis=1)


def fibonacci_directions(n: int, rotation_seed: int) -> np.ndarray:
    """Fibonacci lattice rigidly rotated by a pseudorandom rotation derived from the seed."""
    R = random_rotations(PCG32(rotation_seed, stream=0x5AB), 1)[0]
    return fibonacci_lattice(n) @ R.T


def stab_ray_directions(rng: PCG32, count: int, n: int = N_STAB_RAYS) -> np.ndarray:
    """(count, n, 3): an independently rotated lattice per query point."""
    R = random_rotations(rng, count)
    return np.ascontiguousarray(np.matmul(fibonacci_lattice(n)[None], R.transpose(0, 2, 1)))


def sign_by_stab_rays(bvh: Bvh, x, dirs, n_threads: int = 1):
    """+1 (outside) if any ray escapes the scene unhit, else -1."""
    r = bvh.mesh.bounding_radius
    signs = bvh.stab_signs(x, dirs, RAY_OFFSET * r, n_threads)
    return int(signs[0]) if np.ndim(x) == 1 else signs


def sign_by_normals(bvh: Bvh, x, tri_ids) -> np.ndarray:
    """Sign from the closest triangle's face normal; only meaningful for watertight meshes."""
    c = bvh.mesh.corners[tri_ids]
    q = closest_points_on_triangles(x, c[:, 0], c[:, 1], c[:, 2])
    s = np.einsum("ij,ij->i", x - q, bvh.mesh.normals[tri_ids])
    return np.where(s >= 0, 1, -1).astype(np.int8)


@dataclass
class SdfSamples:
    positions: np.ndarray  # (n, 3)
    distances: np.ndarray  # (n,) signed
    categories: np.ndarray  # (n,) UNIFORM / SURFACE / PERTURBED


def category_counts(n: int) -> tuple[int, int, int]:
    n_uniform = n // 8
    n_surface = (4 * n) // 8
    return n_uniform, n_surface, n - n_uniform - n_surface


def signed_distances(bvh: Bvh, pts, rng: PCG32, sign_mode: str = "stab", n_rays: int = N_STAB_RAYS,
                     n_threads: int = 1) -> np.ndarray:
    dist, tri, _ = bvh.closest(pts, n_threads)
    off = np.nonzero(dist > ON_SURFACE)[0]
    sign = np.ones(len(pts), dtype=np.int8)
    if sign_mode == "stab":
        dirs = stab_ray_directions(rng, len(off), n_rays)
        sign[off] = sign_by_stab_rays(bvh, pts[off], dirs, n_threads)
    elif sign_mode == "normal":
        sign[off] = sign_by_normals(bvh, pts[off], tri[off])
    else:
        raise ValueError(f"unknown sign mode {sign_mode!r}")
    return dist * sign


def sample_training_points(mesh: TriangleMesh, bvh: Bvh, cdf: AreaCdf, n: int, rng: PCG32,
                           perturb_std: float | None = None, uniform_sampler=None,
                           sign_mode: str = "stab", n_threads: int = 1) -> SdfSamples:
    """1/8 uniform in the cube, 4/8 on the surface, 3/8 perturbed off the surface.

    ``perturb_std`` defaults to r/1024. ``uniform_sampler(n, rng)`` replaces
    the cube-uniform category (octree leaves for the octree baseline).
    """
    n_u, n_s, n_p = category_counts(n)
    r = mesh.bounding_radius
    std = r / 1024.0 if perturb_std is None else perturb_std
    uni = rng.random((n_u, 3)) if uniform_sampler is None else uniform_sampler(n_u, rng)
    surf, _ = sample_surface(mesh, cdf, n_s + n_p, rng)
    pert = surf[n_s:] + logistic_noise(rng, std, (n_p, 3))
    pts = np.concatenate([uni, surf[:n_s], np.clip(pert, 0.0, 1.0)])
    cats = np.repeat(np.array([UNIFORM, SURFACE, PERTURBED], dtype=np.int8), [n_u, n_s, n_p])
    return SdfSamples(pts, signed_distances(bvh, pts, rng, sign_mode, n_threads=n_threads), cats)
