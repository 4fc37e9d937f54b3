"""Small fully connected network with explicit forward and backward passes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OUTPUT_ACTIVATIONS = ("linear", "sigmoid")


@dataclass(frozen=True)
class MlpConfig:
    input_width: int
    output_width: int
    hidden_layers: int = 2
    hidden_width: int = 64
    output_activation: str = "linear"

    def __post_init__(self):
        if min(self.input_width, self.output_width, self.hidden_width) < 1:
            raise ValueError("all layer widths must be >= 1")
        if self.hidden_layers < 0:
            raise ValueError("hidden_layers must be >= 0")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) per affine layer."""
        widths = [self.input_width] + [self.hidden_width] * self.hidden_layers + [self.output_width]
        return [(o, i) for i, o in zip(widths[:-1], widths[1:])]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)


class MlpParams:
    """Weights and biases stored in two flat buffers; ``W[k]``/``b[k]`` are views.

    Keeping weights and biases in separate buffers lets the optimizer apply
    L2 to the former only.
    """

    def __init__(self, cfg: MlpConfig, dtype=np.float32):
        self.cfg = cfg
        shapes = cfg.layer_shapes
        self.weights = np.zeros(sum(o * i for o, i in shapes), dtype=dtype)
        self.biases = np.zeros(sum(o for o, _ in shapes), dtype=dtype)
        self.W, self.b = self._views(self.weights, self.biases)

    def _views(self, wbuf, bbuf):
        W, b = [], []
        wo = bo = 0
        for o, i in self.cfg.layer_shapes:
            W.append(wbuf[wo:wo + o * i].reshape(o, i))
            b.append(bbuf[bo:bo + o])
            wo += o * i
            bo += o
        return W, b

    def zeros_like(self) -> "MlpParams":
        return MlpParams(self.cfg, self.weights.dtype)

    @property
    def dtype(self):
        return self.weights.dtype

    def copy(self) -> "MlpParams":
        out = self.zeros_like()
        out.weights[:] = self.weights
        out.biases[:] = self.biases
        return out


def glorot_init(cfg: MlpConfig, seed=0, dtype=np.float32) -> MlpParams:
    """Uniform Glorot/Xavier weights, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = MlpParams(cfg, dtype)
    for W in params.W:
        fan_out, fan_in = W.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W[...] = rng.uniform(-limit, limit, size=W.shape)
    return params


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class MlpCache:
    inputs: list  # input to each affine layer
    pre: list  # pre-activation of each affine layer
    out: np.ndarray


def mlp_forward(params: MlpParams, Y, need_cache: bool = True):
    Y = np.asarray(Y, dtype=params.dtype)
    if Y.ndim != 2 or Y.shape[1] != params.cfg.input_width:
        raise ValueError(f"expected input width {params.cfg.input_width}, got shape {Y.shape}")
    inputs, pre = [], []
    h = Y
    n_layers = len(params.W)
    for k, (W, b) in enumerate(zip(params.W, params.b)):
        z = h @ W.T
        z += b
        if need_cache:
            inputs.append(h)
            pre.append(z)
        h = np.maximum(z, 0) if k < n_layers - 1 else z
    if params.cfg.output_activation == "sigmoid":
        h = sigmoid(h)
    return h, (MlpCache(inputs, pre, h) if need_cache else None)


def mlp_backward(params: MlpParams, cache: MlpCache, dOut, grads: MlpParams | None = None):
    """Reverse pass. Accumulates into ``grads`` (allocated if None); returns ``(grads, dY)``."""
    dOut = np.asarray(dOut, dtype=params.dtype)
    if cache is None or dOut.shape != cache.out.shape:
        raise ValueError("dOut does not match the cached forward pass")
    if grads is None:
        grads = params.zeros_like()
    if params.cfg.output_activation == "sigmoid":
        s = cache.out
        dz = dOut * s * (1 - s)
    else:
        dz = dOut
    for k in reversed(range(len(params.W))):
        h = cache.inputs[k]
        grads.W[k] += dz.T @ h
        grads.b[k] += dz.sum(axis=0)
        dh = dz @ params.W[k]
        if k > 0:
            # ReLU subgradient at exactly 0 is taken to be 0
            dz = dh * (cache.pre[k - 1] > 0)
        else:
            dz = dh
    return grads, dz
