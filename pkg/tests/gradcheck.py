"""End-to-end finite-difference check of a tiny encoding + MLP pipeline."""
from __future__ import annotations

import numpy as np

from hashgrid.encoding import HashEncodingConfig
from hashgrid.mlp import MlpConfig
from hashgrid.model import HashEncoder, NeuralField
from hashgrid.tasks.losses import l2_loss


def tiny_pipeline(seed: int, dim=2, n_levels=2, table_size=2**6, n_features=2, hidden_layers=1,
                  hidden_width=16, n_min=2.0, n_max=12.0, interpolation="linear"):
    rng = np.random.default_rng(seed)
    cfg = HashEncodingConfig(n_levels, table_size, n_features, n_min, n_max, dim, interpolation)
    enc = HashEncoder(cfg, rng, np.float64)
    # larger features than the default init so every path carries signal
    enc.tables.params[:] = rng.uniform(-1, 1, enc.tables.size)
    model = NeuralField(enc, MlpConfig(enc.output_width, 2, hidden_layers, hidden_width), seed,
                        np.float64)
    model.mlp.biases[:] = rng.normal(scale=0.1, size=model.mlp.biases.size)
    X = rng.random((64, dim))
    X = X[_kink_margin(model, X) > 1e-3][:24]
    target = rng.random((len(X), 2))
    return model, X, target


def _kink_margin(model, X):
    """Distance of each point's hidden pre-activations from the ReLU kink at 0."""
    h, _ = model.encoder.forward(X, False)
    margin = np.full(len(X), np.inf)
    for W, b in zip(model.mlp.W[:-1], model.mlp.b[:-1]):
        z = h @ W.T + b
        margin = np.minimum(margin, np.abs(z).min(axis=1))
        h = np.maximum(z, 0)
    return margin


def max_relative_error(model, X, target, h=1e-5, floor=1e-6):
    """Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over every parameter."""
    model.zero_grad()
    out, cache = model.forward(X)
    _, grad = l2_loss(out, target)
    model.backward(cache, grad)
    worst = 0.0
    for g in model.param_groups():
        p = g.params
        for i in range(p.size):
            old = p[i]
            p[i] = old + h
            up = l2_loss(model.forward(X, False)[0], target)[0]
            p[i] = old - h
            down = l2_loss(model.forward(X, False)[0], target)[0]
            p[i] = old
            fd = (up - down) / (2 * h)
            an = float(g.grads[i])
            err = abs(an - fd) / max(abs(an), abs(fd), floor)
            worst = max(worst, err)
    return worst
