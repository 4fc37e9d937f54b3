"""Turning a RunConfig into a trainer, running it, and writing run artifacts."""
from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, write_config
from .encoding import HashEncodingConfig
from .geometry.mesh import MeshError, TriangleMesh, icosphere, load_mesh, unit_cube
from .optim import AdamHyper, LrSchedule
from .tasks.image import ImageTask, ImageTrainer, render_image
from .tasks.render import render_sdf_shaded, save_png
from .tasks.sdf import ENCODER_DEFAULTS, SdfTask, SdfTrainer

IMAGE_DEFAULTS = dict(batch_size=2**14, log_interval=500, lr=1e-2, hidden_layers=2, hidden_width=64)
SDF_BATCH, SDF_LOG_INTERVAL, SDF_N_MAX = 2**11, 1000, 2048.0


def load_image(path) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise ConfigError("input", f"cannot read image {path}: {exc}") from None
    return arr


def load_input_mesh(spec: str) -> TriangleMesh:
    """An OBJ path, or ``builtin:icosphere[:subdivisions]`` / ``builtin:cube``."""
    if spec.startswith("builtin:"):
        name, _, arg = spec[len("builtin:"):].partition(":")
        if name == "icosphere":
            try:
                sub = int(arg) if arg else 3
            except ValueError:
                raise ConfigError("input", f"bad icosphere subdivision {arg!r}") from None
            return icosphere(sub).normalized()
        if name == "cube":
            return unit_cube().normalized()
        raise ConfigError("input", f"unknown builtin shape {name!r}")
    try:
        return load_mesh(spec)
    except (MeshError, OSError) as exc:
        raise ConfigError("input", f"cannot load mesh {spec}: {exc}") from None


def resolve(cfg: RunConfig, data) -> RunConfig:
    """Fill every task-dependent default so the echoed config is complete."""
    r = dataclasses.replace(cfg)
    if cfg.task == "image":
        width = data.shape[1]
        for k, v in IMAGE_DEFAULTS.items():
            if getattr(r, k) is None:
                setattr(r, k, v)
        if r.n_max is None:
            r.n_max = max(width / 2.0, r.n_min)
        if r.loss is None:
            r.loss = "l2"
    else:
        loss, lr, layers, width, rel = ENCODER_DEFAULTS[cfg.encoder]
        r.batch_size = r.batch_size or SDF_BATCH
        r.log_interval = r.log_interval or SDF_LOG_INTERVAL
        r.n_max = SDF_N_MAX if r.n_max is None else r.n_max
        r.loss = r.loss or loss
        r.lr = r.lr or lr
        r.hidden_layers = layers if r.hidden_layers is None else r.hidden_layers
        r.hidden_width = width if r.hidden_width is None else r.hidden_width
        r.perturb_rel = rel if r.perturb_rel is None else r.perturb_rel
    return r.validate()


def hash_config(cfg: RunConfig, dim: int) -> HashEncodingConfig:
    try:
        return HashEncodingConfig(n_levels=cfg.n_levels, table_size=cfg.table_size,
                                  n_features=cfg.n_features, n_min=cfg.n_min, n_max=cfg.n_max,
                                  dim=dim, interpolation=cfg.interpolation)
    except ValueError as exc:
        raise ConfigError("encoding", str(exc)) from None


def build_trainer(cfg: RunConfig, eval_set=None):
    """Returns ``(trainer, resolved config)``."""
    if cfg.task == "image":
        img = load_image(cfg.input)
        r = resolve(cfg, img)
        if r.loss != "l2":
            raise ConfigError("loss", "image runs use the l2 loss")
        task = ImageTask(
            img, hash_config(r, 2) if r.encoder == "hash" else None, r.encoder, r.batch_size,
            r.steps, r.log_interval, r.lr,
            AdamHyper(r.lr, r.beta1, r.beta2, r.eps, r.l2),
            LrSchedule.scaled(r.steps, r.decay_start, r.decay_every, r.decay_factor),
            r.hidden_layers, r.hidden_width, r.n_frequencies, r.precision, r.n_threads)
        return ImageTrainer(task, r.seed), r
    mesh = load_input_mesh(cfg.input)
    r = resolve(cfg, mesh)
    task = SdfTask(
        mesh, encoder=r.encoder, cfg=hash_config(r, 3) if r.encoder == "hash" else None,
        batch_size=r.batch_size, total_steps=r.steps, log_interval=r.log_interval, loss=r.loss,
        lr=r.lr, hidden_layers=r.hidden_layers, hidden_width=r.hidden_width,
        perturb_std=r.perturb_rel * mesh.bounding_radius, n_frequencies=r.n_frequencies,
        octree_max_level=r.octree_max_level, octree_start_level=r.octree_start_level,
        octree_features=r.octree_features, iou_points=r.iou_points,
        schedule=LrSchedule.scaled(r.steps, r.decay_start, r.decay_every, r.decay_factor),
        precision=r.precision, n_threads=r.n_threads)
    tr = SdfTrainer(task, r.seed, eval_set)
    tr.hyper = AdamHyper(r.lr, r.beta1, r.beta2, r.eps, r.l2)
    return tr, r


def run_training(cfg: RunConfig, render: bool = True, eval_set=None, log=None):
    """Train per ``cfg`` and write config.toml, report.csv, model.ckpt and a preview PNG."""
    trainer, r = build_trainer(cfg, eval_set)
    out = Path(r.output)
    out.mkdir(parents=True, exist_ok=True)
    write_config(r, out / "config.toml")
    can_ckpt = r.encoder != "octree"
    if r.resume:
        if not can_ckpt:
            raise ConfigError("resume", "octree models cannot be checkpointed")
        load_checkpoint(r.resume, trainer)
    every = r.checkpoint_interval if (r.checkpoint_interval and can_ckpt) else None
    if log is not None:
        trainer.on_log = lambda row: log(
            f"step {row[0]:>6}  time {row[1]:8.2f}s  loss {row[2]:.6g}  "
            f"{trainer.metric_name} {row[3]:.6g}  lr {row[4]:.3g}")
    while True:
        until = r.steps if every is None else min(r.steps, (trainer.step // every + 1) * every)
        trainer.run(until)
        if every is not None and trainer.step < r.steps:
            save_checkpoint(out / "model.ckpt", trainer)
        if trainer.step >= r.steps:
            break
    trainer.report.to_csv(out / "report.csv")
    if can_ckpt:
        save_checkpoint(out / "model.ckpt", trainer)
    if render:
        write_previews(trainer, r, out)
    return trainer, r


def write_previews(trainer, r: RunConfig, out: Path):
    if r.task == "image":
        task = trainer.task
        img = render_image(trainer.model, task.width, task.height, r.n_threads)
        save_png(img, out / "render.png")
        err = np.abs(img - task.image).mean(axis=2, keepdims=True)
        save_png(np.repeat(np.clip(err * 4.0, 0, 1), 3, axis=2), out / "error.png")
    else:
        save_png(render_sdf_shaded(trainer.model, None, 128, 128), out / "render.png")


def params_for_budget(F: int, L: int, budget: int) -> int:
    """Power-of-two T closest (in log space) to ``budget / (F * L)``."""
    return 2 ** max(0, int(round(math.log2(max(budget / (F * L), 1)))))
