"""Pointwise regression losses returning ``(mean loss, gradient w.r.t. pred)``."""
from __future__ import annotations

import numpy as np

MAPE_EPS = 0.01
REL_L2_EPS = 0.01


def _pair(pred, target):
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    if pred.size == 0:
        raise ValueError("empty batch")
    return pred, target.astype(pred.dtype, copy=False)


def l2_loss(pred, target):
    pred, target = _pair(pred, target)
    diff = pred - target
    n = diff.size
    return float(np.mean(diff.astype(np.float64) ** 2)), (2.0 / n) * diff


def mape_loss(pred, target):
    """|p - t| / (|t| + 0.01); the subgradient at p == t is 0."""
    pred, target = _pair(pred, target)
    diff = pred - target
    denom = np.abs(target) + MAPE_EPS
    loss = float(np.mean(np.abs(diff).astype(np.float64) / denom))
    return loss, np.sign(diff) / denom / diff.size


def relative_l2_loss(pred, target):
    """(p - t)^2 / (p^2 + 0.01) with the denominator held constant for the gradient."""
    pred, target = _pair(pred, target)
    diff = pred - target
    denom = pred * pred + REL_L2_EPS
    loss = float(np.mean((diff * diff).astype(np.float64) / denom))
    return loss, (2.0 / diff.size) * diff / denom


LOSSES = {"l2": l2_loss, "mape": mape_loss, "relative_l2": relative_l2_loss}


def get_loss(name: str):
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; expected one of {sorted(LOSSES)}") from None
