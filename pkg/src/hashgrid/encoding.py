"""Multiresolution hash encoding plus the frequency and octree baselines.

Feature tables for all levels live in one flat parameter array (with a
matching gradient array) so the optimizer can treat them as a single group.
Level ``l`` occupies ``params[offsets[l]:offsets[l + 1]]`` laid out as
``(table_len, F)`` rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

PRIMES = (1, 2654435761, 805459861)
# Inputs are clamped to [0, 1 - CLAMP_EPS] so the ceil corner stays on the lattice.
CLAMP_EPS = 2.0**-20
INIT_RANGE = 1e-4

INTERPOLATION_MODES = ("linear", "smoothstep")


@dataclass(frozen=True)
class HashEncodingConfig:
    n_levels: int = 16
    table_size: int = 2**14
    n_features: int = 2
    n_min: float = 16
    n_max: float = 512
    dim: int = 2
    interpolation: str = "linear"

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValueError(f"n_levels must be >= 1, got {self.n_levels}")
        T = self.table_size
        if T < 1 or T & (T - 1):
            raise ValueError(f"table_size must be a power of two, got {T}")
        if T > 2**31:
            raise ValueError("table_size above 2**31 does not fit 32-bit row indices")
        if self.n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {self.n_features}")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"need 1 <= n_min <= n_max, got {self.n_min}, {self.n_max}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.interpolation not in INTERPOLATION_MODES:
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    @property
    def growth_factor(self) -> float:
        if self.n_levels == 1:
            return 1.0
        return math.exp((math.log(self.n_max) - math.log(self.n_min)) / (self.n_levels - 1))

    @property
    def output_width(self) -> int:
        return self.n_levels * self.n_features


@dataclass(frozen=True)
class GridLevelSpec:
    level: int
    resolution: int
    table_len: int
    dense: bool
    vertices_per_axis: int
    shift: float = 0.0


def level_resolutions(cfg: HashEncodingConfig) -> list[GridLevelSpec]:
    """Per-level grid resolutions and table sizes.

    In smoothstep mode every level is offset by half a voxel, which moves the
    top corner to ``N_l + 1``, so the lattice has ``N_l + 2`` vertices per axis.
    """
    b = cfg.growth_factor
    smooth = cfg.interpolation == "smoothstep"
    specs = []
    for l in range(cfg.n_levels):
        scaled = cfg.n_min * b**l
        # 1e-9 guards against the top level landing a hair under N_max
        res = int(math.floor(scaled * (1.0 + 1e-12) + 1e-9))
        vpa = res + (2 if smooth else 1)
        dense = vpa**cfg.dim <= cfg.table_size
        specs.append(GridLevelSpec(
            level=l,
            resolution=res,
            table_len=vpa**cfg.dim if dense else cfg.table_size,
            dense=dense,
            vertices_per_axis=vpa,
            shift=0.5 if smooth else 0.0,
        ))
    return specs


def parameter_count(cfg: HashEncodingConfig) -> int:
    return sum(s.table_len for s in level_resolutions(cfg)) * cfg.n_features


def spatial_hash(coords, table_size: int):
    """XOR of per-axis products with wrapping 32-bit arithmetic, masked to the table."""
    if table_size < 1 or table_size & (table_size - 1):
        raise ValueError("table_size must be a power of two")
    c = np.asarray(coords)
    if np.any(c < 0):
        raise ValueError("coordinates must be non-negative")
    c = c.astype(np.uint64) & np.uint64(0xFFFFFFFF)
    h = np.zeros(c.shape[:-1], dtype=np.uint64)
    for i in range(c.shape[-1]):
        h ^= (c[..., i] * np.uint64(PRIMES[i])) & np.uint64(0xFFFFFFFF)
    out = h & np.uint64(table_size - 1)
    return int(out) if out.ndim == 0 else out.astype(np.int64)


def grid_vertex_index(spec: GridLevelSpec, coords, table_size: int):
    """Row of a lattice vertex: row-major (first axis fastest) on dense levels, hashed otherwise."""
    c = np.asarray(coords, dtype=np.int64)
    if np.any(c < 0) or np.any(c >= spec.vertices_per_axis):
        raise ValueError(f"coordinates outside the level-{spec.level} lattice")
    if not spec.dense:
        return spatial_hash(c, table_size)
    row = np.zeros(c.shape[:-1], dtype=np.int64)
    for i in reversed(range(c.shape[-1])):
        row = row * spec.vertices_per_axis + c[..., i]
    return int(row) if row.ndim == 0 else row


def smoothstep(x):
    return x * x * (3.0 - 2.0 * x)


def smoothstep_derivative(x):
    return 6.0 * x * (1.0 - x)


def interpolation_weights(frac, mode: str = "linear"):
    """Weights of the 2^d voxel corners; bit ``i`` of the corner index selects the upper side on axis ``i``."""
    frac = np.asarray(frac, dtype=np.float64)
    if mode == "smoothstep":
        frac = smoothstep(frac)
    elif mode != "linear":
        raise ValueError(f"unknown interpolation {mode!r}")
    d = frac.shape[-1]
    bits = (np.arange(1 << d)[:, None] >> np.arange(d)[None, :]) & 1
    f = frac[..., None, :]
    return np.where(bits == 1, f, 1.0 - f).prod(axis=-1)


class FeatureTables:
    """Flat trainable feature rows for a stack of levels, with a gradient accumulator."""

    def __init__(self, table_lens, n_features: int, dtype=np.float32):
        self.table_lens = [int(t) for t in table_lens]
        self.n_features = int(n_features)
        offs = np.zeros(len(self.table_lens) + 1, dtype=np.int64)
        offs[1:] = np.cumsum(self.table_lens) * self.n_features
        self.offsets = offs
        self.params = np.zeros(int(offs[-1]), dtype=dtype)
        self.grads = np.zeros_like(self.params)

    @classmethod
    def for_config(cls, cfg: HashEncodingConfig, rng=None, dtype=np.float32):
        tables = cls([s.table_len for s in level_resolutions(cfg)], cfg.n_features, dtype)
        if rng is not None:
            tables.init_uniform(rng)
        return tables

    def init_uniform(self, rng, scale: float = INIT_RANGE):
        self.params[:] = rng.uniform(-scale, scale, size=self.params.shape)

    @property
    def dtype(self):
        return self.params.dtype

    @property
    def size(self) -> int:
        return self.params.size

    def level(self, l: int) -> np.ndarray:
        return self.params[self.offsets[l]:self.offsets[l + 1]].reshape(-1, self.n_features)

    def level_grad(self, l: int) -> np.ndarray:
        return self.grads[self.offsets[l]:self.offsets[l + 1]].reshape(-1, self.n_features)

    def zero_grad(self):
        self.grads[...] = 0


@dataclass
class EncodeCache:
    """Corner rows and weights per (level, point, corner), plus the clamped inputs."""

    indices: np.ndarray
    weights: np.ndarray
    x: np.ndarray
    specs: list = field(default_factory=list)

    def fractions(self, l: int) -> np.ndarray:
        s = self.specs[l]
        pos = np.clip(self.x, 0.0, 1.0 - CLAMP_EPS) * s.resolution + s.shift
        return pos - np.floor(pos)


def _check_points(X, dim: int) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected points of shape (N, {dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input coordinates")
    if X.size and (X.min() < 0.0 or X.max() > 1.0):
        raise ValueError("input coordinates must lie in the unit hypercube")
    return X


def _level_arrays(specs):
    return (
        np.array([s.resolution for s in specs], dtype=np.float64),
        np.array([s.shift for s in specs], dtype=np.float64),
        np.array([s.vertices_per_axis for s in specs], dtype=np.int64),
        np.array([s.dense for s in specs], dtype=np.uint8),
        np.array([s.table_len for s in specs], dtype=np.int64),
    )


def encode_forward(cfg: HashEncodingConfig, tables: FeatureTables, X, need_cache: bool = True,
                   n_threads: int = 1):
    """Encode points in [0, 1]^d to ``(N, L*F)`` features, levels concatenated in order."""
    X = _check_points(X, cfg.dim)
    specs = level_resolutions(cfg)
    if [s.table_len for s in specs] != tables.table_lens or tables.n_features != cfg.n_features:
        raise ValueError("feature tables do not match the encoding config")
    dtype = tables.dtype
    N, L, F = X.shape[0], cfg.n_levels, cfg.n_features
    C = 1 << cfg.dim
    x = np.ascontiguousarray(X, dtype=dtype)
    out = np.empty((N, L * F), dtype=dtype)
    if need_cache:
        idx = np.empty((L, N, C), dtype=np.int32)
        wts = np.empty((L, N, C), dtype=dtype)
    else:
        idx = np.empty((1, 1, 1), dtype=np.int32)
        wts = np.empty((1, 1, 1), dtype=dtype)
    scales, shifts, strides, dense, lens = _level_arrays(specs)
    kernels.hash_encode_forward(x, tables.params, tables.offsets, scales, shifts, strides, dense,
                                lens, out, idx, wts, F, cfg.interpolation == "smoothstep",
                                need_cache, n_threads)
    cache = EncodeCache(idx, wts, x, specs) if need_cache else None
    return out, cache


def encode_backward(cfg: HashEncodingConfig, tables: FeatureTables, cache: EncodeCache, dY,
                    n_threads: int = 1):
    """Scatter ``weight * dY`` into the gradient rows of every looked-up corner.

    Samples that alias the same row simply add up; any averaging comes from
    the loss normalisation upstream.
    """
    if cache is None:
        raise ValueError("forward pass was run without a cache")
    L, N, _ = cache.indices.shape
    dY = np.ascontiguousarray(dY, dtype=tables.dtype)
    if dY.shape != (N, L * cfg.n_features):
        raise ValueError(f"gradient shape {dY.shape} does not match cache ({N}, {L * cfg.n_features})")
    kernels.hash_encode_backward(cache.indices, cache.weights, dY, tables.grads, tables.offsets,
                                 cfg.n_features, n_threads)


def frequency_encode(X, n_freq: int):
    """Per component: sin(2^k x) for k < n_freq, then the matching cosines."""
    if n_freq < 1:
        raise ValueError("n_freq must be >= 1")
    X = np.asarray(X)
    scaled = X[:, :, None] * (2.0 ** np.arange(n_freq, dtype=X.dtype))  # (N, d, n)
    enc = np.concatenate([np.sin(scaled), np.cos(scaled)], axis=2)  # (N, d, 2n)
    return enc.reshape(X.shape[0], -1)


@dataclass
class OctreeCache:
    rows: list  # per lookup level: (N, 8) int64 rows, -1 where invalid
    weights: list  # per lookup level: (N, 8)
    valid: np.ndarray  # (N, n_lookup) bool


def octree_feature_tables(octree, n_features: int = 8, start_level: int = 4, rng=None,
                          dtype=np.float32) -> FeatureTables:
    lens = [octree.n_vertices(k) for k in range(start_level, octree.max_level + 1)]
    tables = FeatureTables(lens, n_features, dtype)
    if rng is not None:
        tables.init_uniform(rng)
    return tables


def octree_encode(octree, tables: FeatureTables, X, start_level: int = 4, need_cache: bool = True):
    """Trilinear lookups in the occupied voxels of levels start_level..max_level, concatenated.

    Returns ``(Y, valid, cache)``. Where a point is not inside an occupied
    voxel of some level, that level's slice is zero and ``valid`` is False.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError("octree encoding expects (N, 3) points")
    N, F = X.shape[0], tables.n_features
    levels = list(range(start_level, octree.max_level + 1))
    Y = np.zeros((N, len(levels) * F), dtype=tables.dtype)
    valid = np.zeros((N, len(levels)), dtype=bool)
    inside_root = np.all((X >= 0.0) & (X <= 1.0), axis=1) & np.all(np.isfinite(X), axis=1)
    bits = (np.arange(8)[:, None] >> np.arange(3)[None, :]) & 1
    rows_all, w_all = [], []
    xc = np.clip(X, 0.0, 1.0 - CLAMP_EPS)
    for j, k in enumerate(levels):
        pos = xc * (1 << k)
        cell = np.floor(pos).astype(np.int64)
        frac = pos - cell
        occ = octree.contains(k, cell) & inside_root
        verts = cell[:, None, :] + bits[None, :, :]
        rows = np.full((N, 8), -1, dtype=np.int64)
        if np.any(occ):
            rows[occ] = octree.vertex_rows(k, verts[occ].reshape(-1, 3)).reshape(-1, 8)
        w = np.where(bits == 1, frac[:, None, :], 1.0 - frac[:, None, :]).prod(axis=2)
        w = np.where(occ[:, None], w, 0.0).astype(tables.dtype)
        table = tables.level(j)
        Y[:, j * F:(j + 1) * F] = np.einsum("nc,ncf->nf", w, table[np.maximum(rows, 0)])
        valid[:, j] = occ
        rows_all.append(rows)
        w_all.append(w)
    cache = OctreeCache(rows_all, w_all, valid) if need_cache else None
    return Y, valid, cache


def octree_encode_backward(tables: FeatureTables, cache: OctreeCache, dY):
    F = tables.n_features
    for j, (rows, w) in enumerate(zip(cache.rows, cache.weights)):
        ok = rows >= 0
        r = rows[ok]
        n_rows = tables.table_lens[j]
        g = tables.level_grad(j)
        for f in range(F):
            contrib = (w * dY[:, j * F + f][:, None])[ok]
            g[:, f] += np.bincount(r, weights=contrib, minlength=n_rows).astype(tables.dtype)
