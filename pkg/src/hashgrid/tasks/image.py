"""Fitting an RGB image with a 2-D neural field."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..encoding import HashEncodingConfig
from ..mlp import MlpConfig
from ..model import NeuralField, make_encoder
from ..optim import AdamHyper, LrSchedule
from .losses import l2_loss
from .metrics import psnr_from_mse
from .trainer import Trainer, seed_streams

EVAL_FULL_LIMIT = 1 << 22
EVAL_SUBSET = 1 << 16


def default_image_encoding(width: int, **overrides) -> HashEncodingConfig:
    kw = dict(dim=2, n_max=max(width / 2.0, 16.0))
    kw.update(overrides)
    kw["n_max"] = max(kw["n_max"], kw.get("n_min", 16))
    return HashEncodingConfig(**kw)


@dataclass
class ImageTask:
    image: np.ndarray  # (H, W, 3) in [0, 1]
    cfg: HashEncodingConfig | None = None
    encoder: str = "hash"
    batch_size: int = 1 << 14
    total_steps: int = 10_000
    log_interval: int = 500
    lr: float = 1e-2
    hyper: AdamHyper | None = None
    schedule: LrSchedule | None = None
    hidden_layers: int = 2
    hidden_width: int = 64
    n_frequencies: int = 10
    precision: str = "float32"
    n_threads: int = 1
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.float64)
        if img.ndim == 2:
            img = np.repeat(img[:, :, None], 3, axis=2)
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError(f"image must be (H, W, 3), got {np.shape(self.image)}")
        if img.shape[0] < 2 or img.shape[1] < 2:
            raise ValueError("image must be at least 2x2")
        if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
            raise ValueError("image values must lie in [0, 1]")
        self.image = img
        if self.cfg is None and self.encoder == "hash":
            self.cfg = default_image_encoding(self.width)
        if self.cfg is not None and self.cfg.dim != 2:
            raise ValueError("image tasks need a 2-D encoding")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.precision not in ("float32", "float64"):
            raise ValueError("precision must be float32 or float64")

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def dtype(self):
        return np.dtype(self.precision)


def pixel_centers(width: int, height: int, index=None) -> np.ndarray:
    """Pixel centres mapped to [0, 1]^2 as (x, y), row-major pixel order."""
    if index is None:
        index = np.arange(width * height)
    index = np.asarray(index)
    return np.stack([((index % width) + 0.5) / width, ((index // width) + 0.5) / height], axis=1)


def build_image_model(task: ImageTask, seed: int) -> NeuralField:
    mlp_rng, table_rng, _ = seed_streams(seed, 3)
    enc = make_encoder(task.encoder, 2, task.cfg, task.n_frequencies, rng=table_rng,
                       dtype=task.dtype)
    mcfg = MlpConfig(enc.output_width, 3, task.hidden_layers, task.hidden_width, "sigmoid")
    return NeuralField(enc, mcfg, mlp_rng, task.dtype)


class ImageTrainer(Trainer):
    metric_name = "psnr"

    def __init__(self, task: ImageTask, seed: int = 0, model: NeuralField | None = None):
        self.task = task
        _, _, self.rng = seed_streams(seed, 3)
        model = build_image_model(task, seed) if model is None else model
        hyper = task.hyper or AdamHyper(lr=task.lr)
        schedule = task.schedule or LrSchedule.scaled(task.total_steps)
        super().__init__(model, l2_loss, hyper, schedule, task.total_steps, task.log_interval,
                         task.n_threads)
        H, W = task.height, task.width
        self.pixels = task.image.reshape(-1, 3).astype(task.dtype)
        if H * W <= EVAL_FULL_LIMIT:
            self.eval_index = np.arange(H * W)
        else:
            sub = np.random.default_rng(np.random.SeedSequence(int(seed)).spawn(4)[3])
            self.eval_index = np.sort(sub.choice(H * W, EVAL_SUBSET, replace=False))
        self.eval_x = pixel_centers(W, H, self.eval_index).astype(task.dtype)

    def sample_batch(self):
        idx = self.rng.integers(0, len(self.pixels), self.task.batch_size)
        x = pixel_centers(self.task.width, self.task.height, idx).astype(self.task.dtype)
        return x, self.pixels[idx]

    def evaluate(self) -> float:
        pred = self.model.predict(self.eval_x, n_threads=self.n_threads)
        diff = pred.astype(np.float64) - self.pixels[self.eval_index]
        return psnr_from_mse(float(np.mean(diff * diff)))

    def rng_state(self) -> dict:
        return self.rng.bit_generator.state

    def set_rng_state(self, st: dict):
        self.rng.bit_generator.state = st


def fit_image(task: ImageTask, seed: int = 0):
    tr = ImageTrainer(task, seed)
    return tr.model, tr.run()


def render_image(model: NeuralField, width: int, height: int, n_threads: int = 1) -> np.ndarray:
    """Model evaluated at every pixel centre, (H, W, C)."""
    x = pixel_centers(width, height).astype(model.dtype)
    out = model.predict(x, n_threads=n_threads)
    return out.reshape(height, width, -1)
