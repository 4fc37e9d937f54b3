"""``hashgrid`` command line: fit-image, fit-sdf, render, eval-iou, sweep."""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from .config import ALIASES, ConfigError, RunConfig, parse_config
from .tasks.trainer import TrainingError

EXIT_OK, EXIT_CONFIG, EXIT_TRAINING = 0, 1, 2


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML file with run settings")
    g = p.add_argument_group("run settings (override the config file)")
    for f in fields(RunConfig):
        if f.name == "task":
            continue
        names = ["--" + f.name, "--" + f.name.replace("_", "-")]
        names += ["--" + a for a, k in ALIASES.items() if k == f.name]
        g.add_argument(*dict.fromkeys(names), dest="opt_" + f.name, default=None, metavar="V")


def _overrides(args) -> dict:
    return {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_") and v is not None}


def _echo(msg):
    print(msg, flush=True)


def cmd_fit(args, task: str) -> int:
    from .runner import run_training

    cfg = parse_config(args.config, {**_overrides(args), "task": task})
    trainer, r = run_training(cfg, render=not args.no_render, log=_echo)
    rep = trainer.report
    _echo(f"final {rep.metric_name} {rep.final_metric:.6g} after {trainer.step} steps; "
          f"outputs in {r.output}")
    return EXIT_OK


def cmd_render(args) -> int:
    from .checkpoint import CheckpointError, load_model
    from .tasks.image import render_image
    from .tasks.render import Camera, render_sdf_shaded, save_png

    try:
        model = load_model(args.model)
    except (OSError, CheckpointError) as exc:
        raise ConfigError("model", str(exc)) from None
    if model.dim == 2:
        img = render_image(model, args.width, args.height, args.threads)
    elif model.dim == 3:
        cam = Camera(tuple(args.camera), tuple(args.target), fov_deg=args.fov)
        img = render_sdf_shaded(model, cam, args.width, args.height)
    else:
        raise ConfigError("model", f"cannot render a {model.dim}-D model")
    save_png(img, args.out)
    _echo(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval_iou(args) -> int:
    from .checkpoint import CheckpointError, load_model
    from .geometry.bvh import Bvh
    from .runner import load_input_mesh
    from .tasks.sdf import make_sdf_eval_set

    try:
        model = load_model(args.model)
    except (OSError, CheckpointError) as exc:
        raise ConfigError("model", str(exc)) from None
    if model.dim != 3:
        raise ConfigError("model", "IoU needs a 3-D SDF model")
    ev = make_sdf_eval_set(Bvh(load_input_mesh(args.mesh)), args.points, args.seed, args.threads)
    value = ev.score(model)
    _echo(f"iou {value:.6f} at {args.points} points")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .sweep import parse_values, run_sweep

    cfg = parse_config(args.config, {**_overrides(args), "task": args.task})
    values = parse_values(args.axis, args.values)
    reports = run_sweep(cfg, args.axis, values, args.parallel, log=_echo)
    for label, rep in reports.items():
        _echo(f"{label}: " + ("failed" if rep is None else f"final metric {rep.final_metric:.6g}"))
    _echo(f"summary in {cfg.output}/summary.csv")
    return EXIT_OK if all(r is not None for r in reports.values()) else EXIT_TRAINING


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hashgrid", description="Neural fields with a multiresolution hash encoding.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("fit-image", "fit-sdf"):
        s = sub.add_parser(name, help=f"train a {'2-D image' if name == 'fit-image' else 'signed distance'} model")
        _add_run_flags(s)
        s.add_argument("--no-render", action="store_true", help="skip the preview PNG")
    s = sub.add_parser("render", help="render a saved model to PNG")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--width", type=int, default=256)
    s.add_argument("--height", type=int, default=256)
    s.add_argument("--camera", type=float, nargs=3, default=(1.7, 1.3, 2.1))
    s.add_argument("--target", type=float, nargs=3, default=(0.5, 0.5, 0.5))
    s.add_argument("--fov", type=float, default=40.0)
    s.add_argument("--threads", type=int, default=1)
    s = sub.add_parser("eval-iou", help="IoU of a saved SDF model against a mesh")
    s.add_argument("--model", required=True)
    s.add_argument("--mesh", required=True, help="OBJ path or builtin:icosphere[:n]")
    s.add_argument("--points", type=int, default=2**20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s = sub.add_parser("sweep", help="train one model per value of T or of (F, L)")
    _add_run_flags(s)
    s.add_argument("--task", choices=("image", "sdf"), default="image")
    s.add_argument("--axis", choices=("T", "F_L"), required=True)
    s.add_argument("--values", required=True, help="T: 1024,2^12,...  F_L: 1,2,4 or 2x16,...")
    s.add_argument("--parallel", type=int, default=1, help="concurrent runs")
    return p


def main(argv=None) -> int:
    args, unknown = build_parser().parse_known_args(argv)
    try:
        if unknown:
            key = unknown[0].lstrip("-").split("=", 1)[0]
            raise ConfigError(key, "unknown configuration key")
        if args.command == "fit-image":
            return cmd_fit(args, "image")
        if args.command == "fit-sdf":
            return cmd_fit(args, "sdf")
        if args.command == "render":
            return cmd_render(args)
        if args.command == "eval-iou":
            return cmd_eval_iou(args)
        return cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
