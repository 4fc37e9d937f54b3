"""Encoder + MLP composition with a single backward entry point."""
from __future__ import annotations

import numpy as np

from .encoding import (
    FeatureTables,
    HashEncodingConfig,
    encode_backward,
    encode_forward,
    frequency_encode,
    octree_encode,
    octree_encode_backward,
    octree_feature_tables,
)
from .mlp import MlpConfig, MlpParams, glorot_init, mlp_backward, mlp_forward
from .optim import ParamGroup

ENCODERS = ("hash", "frequency", "octree", "none")


class HashEncoder:
    kind = "hash"

    def __init__(self, cfg: HashEncodingConfig, rng=None, dtype=np.float32):
        self.cfg = cfg
        self.dim = cfg.dim
        self.tables = FeatureTables.for_config(cfg, rng, dtype)

    @property
    def output_width(self) -> int:
        return self.cfg.output_width

    def forward(self, X, need_cache=True, n_threads=1):
        return encode_forward(self.cfg, self.tables, X, need_cache, n_threads)

    def backward(self, cache, dY, n_threads=1):
        encode_backward(self.cfg, self.tables, cache, dY, n_threads)

    def param_groups(self):
        return [ParamGroup("hash_tables", self.tables.params, self.tables.grads,
                           apply_l2=False, skip_zero_grad=True)]


class FrequencyEncoder:
    kind = "frequency"

    def __init__(self, dim: int, n_freq: int = 10, dtype=np.float32):
        self.dim, self.n_freq, self.dtype = dim, n_freq, dtype

    @property
    def output_width(self) -> int:
        return 2 * self.n_freq * self.dim

    def forward(self, X, need_cache=True, n_threads=1):
        return frequency_encode(np.asarray(X, dtype=self.dtype), self.n_freq), None

    def backward(self, cache, dY, n_threads=1):
        pass

    def param_groups(self):
        return []


class IdentityEncoder:
    kind = "none"

    def __init__(self, dim: int, dtype=np.float32):
        self.dim, self.dtype = dim, dtype

    @property
    def output_width(self) -> int:
        return self.dim

    def forward(self, X, need_cache=True, n_threads=1):
        return np.asarray(X, dtype=self.dtype), None

    def backward(self, cache, dY, n_threads=1):
        pass

    def param_groups(self):
        return []


class OctreeEncoder:
    """Concatenated trilinear lookups on the vertices of a surface octree."""

    kind = "octree"

    def __init__(self, octree, n_features: int = 8, start_level: int = 4, rng=None,
                 dtype=np.float32):
        if not 0 <= start_level <= octree.max_level:
            raise ValueError("start_level must lie within the octree depth")
        self.octree, self.start_level, self.dim = octree, start_level, 3
        self.tables = octree_feature_tables(octree, n_features, start_level, rng, dtype)
        self.last_valid = None
        self._exterior = None

    def empty_space_fill(self, X):
        """Points outside every occupied lookup voxel get +-h from a flood fill of empty cells.

        Returns ``(mask, value)``; ``h`` is the coarsest lookup voxel size and
        the sign is + for empty space reachable from the cube boundary.
        """
        k = self.start_level
        if self._exterior is None:
            self._exterior = self.octree.exterior_cells(k)
        X = np.asarray(X, dtype=np.float64)
        cell = np.floor(np.clip(X, 0.0, 1.0 - 2.0**-20) * (1 << k)).astype(np.int64)
        empty = ~self.octree.contains(k, cell)
        h = 1.0 / (1 << k)
        ext = self._exterior[cell[:, 0], cell[:, 1], cell[:, 2]]
        return empty, np.where(ext, h, -h)

    @property
    def output_width(self) -> int:
        return (self.octree.max_level - self.start_level + 1) * self.tables.n_features

    def forward(self, X, need_cache=True, n_threads=1):
        Y, valid, cache = octree_encode(self.octree, self.tables, X, self.start_level, need_cache)
        self.last_valid = valid
        return Y, cache

    def backward(self, cache, dY, n_threads=1):
        octree_encode_backward(self.tables, cache, dY)

    def param_groups(self):
        return [ParamGroup("octree_features", self.tables.params, self.tables.grads,
                           apply_l2=False, skip_zero_grad=True)]


class NeuralField:
    """``m(enc(x))``; gradients accumulate into the encoder tables and ``mlp_grads``."""

    def __init__(self, encoder, mlp_cfg: MlpConfig, seed=0, dtype=np.float32):
        if mlp_cfg.input_width != encoder.output_width:
            raise ValueError("MLP input width must equal the encoder output width")
        self.encoder = encoder
        self.mlp = glorot_init(mlp_cfg, seed, dtype)
        self.mlp_grads = self.mlp.zeros_like()
        self._groups = None

    @property
    def dim(self) -> int:
        return self.encoder.dim

    @property
    def dtype(self):
        return self.mlp.dtype

    def forward(self, X, need_cache=True, n_threads=1):
        Y, enc_cache = self.encoder.forward(X, need_cache, n_threads)
        out, mlp_cache = mlp_forward(self.mlp, Y, need_cache)
        return out, ((enc_cache, mlp_cache) if need_cache else None)

    def backward(self, cache, dOut, n_threads=1):
        enc_cache, mlp_cache = cache
        _, dY = mlp_backward(self.mlp, mlp_cache, dOut, self.mlp_grads)
        self.encoder.backward(enc_cache, dY, n_threads)

    def predict(self, X, chunk: int = 1 << 16, n_threads=1) -> np.ndarray:
        """Batched inference; encoders with sparse support fill empty space themselves."""
        X = np.asarray(X)
        outs = [self.forward(X[i:i + chunk], False, n_threads)[0] for i in range(0, len(X), chunk)]
        if not outs:
            return np.zeros((0, self.mlp.cfg.output_width), dtype=self.dtype)
        out = np.concatenate(outs)
        fill = getattr(self.encoder, "empty_space_fill", None)
        if fill is not None:
            mask, value = fill(X)
            out[mask] = value[mask, None]
        return out

    def __call__(self, X):
        return self.predict(X)

    def param_groups(self):
        """Stable list of groups; moments live on the group objects."""
        if self._groups is None:
            self._groups = self.encoder.param_groups() + [
                ParamGroup("mlp_weights", self.mlp.weights, self.mlp_grads.weights,
                           apply_l2=True, skip_zero_grad=False),
                ParamGroup("mlp_biases", self.mlp.biases, self.mlp_grads.biases,
                           apply_l2=False, skip_zero_grad=False),
            ]
        return self._groups

    def zero_grad(self):
        for g in self.param_groups():
            g.grads[...] = 0

    @property
    def n_params(self) -> int:
        return sum(g.params.size for g in self.param_groups())


def make_encoder(kind: str, dim: int, hash_cfg: HashEncodingConfig | None = None,
                 n_frequencies: int = 10, octree=None, octree_features: int = 8,
                 octree_start_level: int = 4, rng=None, dtype=np.float32):
    if kind == "hash":
        if hash_cfg is None or hash_cfg.dim != dim:
            raise ValueError("hash encoder needs a config with matching dim")
        return HashEncoder(hash_cfg, rng, dtype)
    if kind == "frequency":
        return FrequencyEncoder(dim, n_frequencies, dtype)
    if kind == "octree":
        if octree is None or dim != 3:
            raise ValueError("octree encoder needs a 3-D surface octree")
        return OctreeEncoder(octree, octree_features, octree_start_level, rng, dtype)
    if kind == "none":
        return IdentityEncoder(dim, dtype)
    raise ValueError(f"unknown encoder {kind!r}; expected one of {ENCODERS}")
