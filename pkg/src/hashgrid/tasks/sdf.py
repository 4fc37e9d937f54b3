"""Fitting a signed distance function to a triangle mesh."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..encoding import HashEncodingConfig
from ..geometry.bvh import Bvh
from ..geometry.mesh import TriangleMesh
from ..geometry.octree import SurfaceOctree, build_surface_octree, octree_sample_positions
from ..geometry.sampling import (
    N_STAB_RAYS,
    build_area_cdf,
    sample_training_points,
    sign_by_stab_rays,
    stab_ray_directions,
)
from ..mlp import MlpConfig
from ..model import NeuralField, make_encoder
from ..optim import AdamHyper, LrSchedule
from ..pcg import PCG32
from .losses import get_loss
from .metrics import IouEvalSet
from .trainer import Trainer, seed_streams

SDF_ENCODERS = ("hash", "frequency", "octree")

# per-encoder defaults: (loss, lr, hidden_layers, hidden_width, perturbation std / r)
ENCODER_DEFAULTS = {
    "hash": ("mape", 1e-4, 2, 64, 1 / 1024),
    "octree": ("mape", 1e-4, 2, 64, 1 / 1024),
    "frequency": ("relative_l2", 3e-4, 8, 128, 1 / 128),
}

SAMPLE_STREAM, EVAL_STREAM = 1, 2


def default_sdf_encoding(**overrides) -> HashEncodingConfig:
    kw = dict(dim=3, n_max=2048)
    kw.update(overrides)
    return HashEncodingConfig(**kw)


@dataclass
class SdfTask:
    mesh: TriangleMesh  # already normalised into the unit cube
    bvh: Bvh | None = None
    encoder: str = "hash"
    cfg: HashEncodingConfig | None = None
    batch_size: int = 1 << 12
    total_steps: int = 10_000
    log_interval: int = 1000
    loss: str | None = None
    lr: float | None = None
    hidden_layers: int | None = None
    hidden_width: int | None = None
    perturb_std: float | None = None
    n_frequencies: int = 10
    octree_max_level: int = 8
    octree_start_level: int = 4
    octree_features: int = 8
    iou_points: int = 1 << 20
    sign_mode: str = "stab"
    schedule: LrSchedule | None = None
    precision: str = "float32"
    n_threads: int = 1

    def __post_init__(self):
        if self.encoder not in SDF_ENCODERS:
            raise ValueError(f"unknown SDF encoder {self.encoder!r}; expected one of {SDF_ENCODERS}")
        lo, hi = self.mesh.bbox
        if lo.min() < 0 or hi.max() > 1:
            raise ValueError("mesh must lie inside the unit cube; normalise it first")
        loss, lr, layers, width, rel_std = ENCODER_DEFAULTS[self.encoder]
        self.loss = self.loss or loss
        self.lr = self.lr or lr
        self.hidden_layers = layers if self.hidden_layers is None else self.hidden_layers
        self.hidden_width = width if self.hidden_width is None else self.hidden_width
        if self.perturb_std is None:
            self.perturb_std = rel_std * self.mesh.bounding_radius
        if self.encoder == "hash" and self.cfg is None:
            self.cfg = default_sdf_encoding()
        if self.cfg is not None and self.cfg.dim != 3:
            raise ValueError("SDF tasks need a 3-D encoding")
        if self.bvh is None:
            self.bvh = Bvh(self.mesh)
        if self.batch_size < 8:
            raise ValueError("batch_size must be >= 8 so every sample category is present")
        get_loss(self.loss)

    @property
    def dtype(self):
        return np.dtype(self.precision)


def make_sdf_eval_set(bvh: Bvh, n_points: int, seed: int = 0, n_threads: int = 1) -> IouEvalSet:
    """Uniform points in the unit cube signed by the stab-ray oracle."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = PCG32(seed, EVAL_STREAM)
    pts = rng.random((n_points, 3))
    signs = np.empty(n_points, dtype=np.int8)
    chunk = 1 << 16
    for i in range(0, n_points, chunk):
        q = pts[i:i + chunk]
        signs[i:i + chunk] = sign_by_stab_rays(bvh, q, stab_ray_directions(rng, len(q), N_STAB_RAYS),
                                               n_threads)
    return IouEvalSet(pts, signs)


def build_sdf_model(task: SdfTask, seed: int, octree: SurfaceOctree | None = None) -> NeuralField:
    mlp_rng, table_rng, _ = seed_streams(seed, 3)
    enc = make_encoder(task.encoder, 3, task.cfg, task.n_frequencies, octree,
                       task.octree_features, task.octree_start_level, table_rng, task.dtype)
    mcfg = MlpConfig(enc.output_width, 1, task.hidden_layers, task.hidden_width, "linear")
    return NeuralField(enc, mcfg, mlp_rng, task.dtype)


class SdfTrainer(Trainer):
    metric_name = "iou"

    def __init__(self, task: SdfTask, seed: int = 0, eval_set: IouEvalSet | None = None):
        self.task = task
        self.octree = None
        self.uniform_sampler = None
        if task.encoder == "octree":
            self.octree = build_surface_octree(task.mesh, task.bvh, task.octree_max_level)
            self.uniform_sampler = lambda n, rng: octree_sample_positions(self.octree, n, rng)
        model = build_sdf_model(task, seed, self.octree)
        schedule = task.schedule or LrSchedule.scaled(task.total_steps)
        super().__init__(model, get_loss(task.loss), AdamHyper(lr=task.lr), schedule,
                         task.total_steps, task.log_interval, task.n_threads)
        self.cdf = build_area_cdf(task.mesh)
        self.rng = PCG32(seed, SAMPLE_STREAM)
        self.eval_set = eval_set if eval_set is not None else make_sdf_eval_set(
            task.bvh, task.iou_points, seed, task.n_threads)

    def sample_batch(self):
        s = sample_training_points(self.task.mesh, self.task.bvh, self.cdf, self.task.batch_size,
                                   self.rng, self.task.perturb_std, self.uniform_sampler,
                                   self.task.sign_mode, self.n_threads)
        return s.positions.astype(self.task.dtype), s.distances[:, None].astype(self.task.dtype)

    def evaluate(self) -> float:
        return self.eval_set.score(self.model)

    def rng_state(self) -> dict:
        return self.rng.get_state()

    def set_rng_state(self, st: dict):
        self.rng.set_state(st)


def fit_sdf(task: SdfTask, seed: int = 0, eval_set: IouEvalSet | None = None):
    tr = SdfTrainer(task, seed, eval_set)
    return tr.model, tr.run()
