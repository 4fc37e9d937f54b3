"""Image and shape quality metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSNR_CAP = 100.0


def mse(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(m: float) -> float:
    if m <= 0:
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * float(np.log10(m)))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio for unit-range images, capped at 100 dB."""
    return psnr_from_mse(mse(a, b))


def iou_from_values(pred, ref) -> float:
    """Interior IoU from two arrays of signed values; 1 when both interiors are empty."""
    a = np.asarray(pred).reshape(-1) < 0
    b = np.asarray(ref).reshape(-1) < 0
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


@dataclass
class IouEvalSet:
    """Fixed evaluation points with reference signs (+1 outside, -1 inside)."""

    points: np.ndarray
    signs: np.ndarray

    def score(self, model, chunk: int = 1 << 16) -> float:
        return iou_from_values(model.predict(self.points, chunk)[:, 0], self.signs)


def uniform_in_bbox(rng, n: int, bbox) -> np.ndarray:
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bbox)
    return lo + (hi - lo) * rng.random((n, len(lo)))


def make_iou_eval_set(oracle_sign_fn, n_points: int, rng, bbox=((0, 0, 0), (1, 1, 1))) -> IouEvalSet:
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    pts = uniform_in_bbox(rng, n_points, bbox)
    return IouEvalSet(pts, np.asarray(oracle_sign_fn(pts)))


def iou(model, oracle_sign_fn, n_points: int, rng, bbox=((0, 0, 0), (1, 1, 1))) -> float:
    """Monte-Carlo interior IoU of ``model`` (callable on (n, d) points) against the oracle."""
    ev = make_iou_eval_set(oracle_sign_fn, n_points, rng, bbox)
    pred = model(ev.points)
    return iou_from_values(np.asarray(pred).reshape(len(ev.points), -1)[:, 0], ev.signs)
