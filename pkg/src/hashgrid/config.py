"""Run configuration: defaults, TOML files, command-line overrides and validation."""
from __future__ import annotations

import dataclasses
import sys
import typing
from dataclasses import dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

TASKS = ("image", "sdf")
ENCODER_KINDS = ("hash", "frequency", "octree", "none")

# short names accepted on the command line and in TOML files
ALIASES = {
    "T": "table_size",
    "L": "n_levels",
    "F": "n_features",
    "N_min": "n_min",
    "N_max": "n_max",
    "threads": "n_threads",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    task: str = "image"
    encoder: str = "hash"
    input: str = ""
    output: str = "runs/latest"
    seed: int = 0
    steps: int = 10_000
    log_interval: typing.Optional[int] = None
    batch_size: typing.Optional[int] = None
    # hash encoding
    n_levels: int = 16
    table_size: int = 2**14
    n_features: int = 2
    n_min: float = 16.0
    n_max: typing.Optional[float] = None
    interpolation: str = "linear"
    # baselines
    n_frequencies: int = 10
    octree_max_level: int = 8
    octree_start_level: int = 4
    octree_features: int = 8
    # network
    hidden_layers: typing.Optional[int] = None
    hidden_width: typing.Optional[int] = None
    # optimizer
    lr: typing.Optional[float] = None
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-15
    l2: float = 1e-6
    decay_factor: float = 0.33
    decay_start: float = 0.65
    decay_every: float = 0.30
    # sdf
    loss: typing.Optional[str] = None
    perturb_rel: typing.Optional[float] = None
    iou_points: int = 2**20
    # execution
    precision: str = "float32"
    n_threads: int = 1
    checkpoint_interval: int = 0
    resume: str = ""

    def validate(self) -> "RunConfig":
        _choice("task", self.task, TASKS)
        _choice("encoder", self.encoder, ENCODER_KINDS)
        _choice("interpolation", self.interpolation, ("linear", "smoothstep"))
        _choice("precision", self.precision, ("float32", "float64"))
        if self.loss is not None:
            _choice("loss", self.loss, ("l2", "mape", "relative_l2"))
        if self.task == "sdf" and self.encoder == "none":
            raise ConfigError("encoder", "SDF runs need an encoder (hash, frequency or octree)")
        if self.task == "image" and self.encoder == "octree":
            raise ConfigError("encoder", "the octree encoder only exists for SDF runs")
        if self.task == "sdf" and self.encoder == "hash" and self.n_max is not None \
                and self.n_max < self.n_min:
            raise ConfigError("n_max", "must be >= n_min")
        T = self.table_size
        if T < 1 or T & (T - 1):
            raise ConfigError("table_size", f"must be a power of two, got {T}")
        for key in ("steps", "iou_points", "n_levels", "n_features", "n_frequencies",
                    "n_threads", "octree_features"):
            if getattr(self, key) < (0 if key == "steps" else 1):
                raise ConfigError(key, f"out of range: {getattr(self, key)}")
        for key in ("log_interval", "batch_size", "hidden_width"):
            v = getattr(self, key)
            if v is not None and v < 1:
                raise ConfigError(key, f"must be >= 1, got {v}")
        if self.hidden_layers is not None and self.hidden_layers < 0:
            raise ConfigError("hidden_layers", "must be >= 0")
        if self.n_min < 1:
            raise ConfigError("n_min", "must be >= 1")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError("lr", "must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ConfigError("decay_factor", "must lie in (0, 1]")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval", "must be >= 0")
        return self

    def to_dict(self, drop_none: bool = True) -> dict:
        d = dataclasses.asdict(self)
        return {k: v for k, v in d.items() if not (drop_none and v is None)}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def replace(self, **changes) -> "RunConfig":
        return apply_overrides(self, changes)


def _choice(key, value, options):
    if value not in options:
        raise ConfigError(key, f"expected one of {', '.join(options)}, got {value!r}")


def _field_types() -> dict:
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in fields(RunConfig)}


def _base_type(tp):
    args = typing.get_args(tp)
    if args and type(None) in args:
        return next(a for a in args if a is not type(None)), True
    return tp, False


def coerce(key: str, value, tp):
    """Convert ``value`` (from TOML or a flag string) to the field type, naming ``key`` on failure."""
    base, optional = _base_type(tp)
    if isinstance(value, str) and base is not str:
        text = value.strip()
        if optional and text.lower() in ("none", ""):
            return None
        try:
            if base is int:
                if "^" in text:
                    b, e = text.split("^")
                    return int(b) ** int(e)
                return int(text, 0)
            if base is float:
                return float(text)
        except ValueError:
            raise ConfigError(key, f"expected {base.__name__}, got {value!r}") from None
    if value is None and optional:
        return None
    if base is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if base is int and isinstance(value, float) and value.is_integer():
        raise ConfigError(key, f"expected int, got float {value!r}")
    if not isinstance(value, base) or (base is not bool and isinstance(value, bool)):
        raise ConfigError(key, f"expected {base.__name__}, got {type(value).__name__} {value!r}")
    return value


def canonical_key(key: str) -> str:
    key = ALIASES.get(key, key)
    return key.replace("-", "_")


def apply_overrides(cfg: RunConfig, values: dict) -> RunConfig:
    types = _field_types()
    out = dataclasses.replace(cfg)
    for raw_key, value in values.items():
        key = canonical_key(raw_key)
        if key not in types:
            raise ConfigError(raw_key, "unknown configuration key")
        setattr(out, key, coerce(key, value, types[key]))
    return out


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML in {path}: {exc}") from None
    flat = {}
    for k, v in data.items():
        # one level of tables is allowed purely for grouping
        if isinstance(v, dict):
            for k2, v2 in v.items():
                flat[k2] = v2
        else:
            flat[k] = v
    return flat


def parse_config(path=None, overrides: dict | None = None, require_input: bool = True) -> RunConfig:
    """Defaults, then the TOML file, then ``overrides`` (already split into key/value pairs)."""
    cfg = RunConfig()
    if path is not None:
        cfg = apply_overrides(cfg, load_toml(path))
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    cfg.validate()
    if require_input and not cfg.input:
        raise ConfigError("input", "missing input path")
    if require_input and not cfg.input.startswith("builtin:") and not Path(cfg.input).exists():
        raise ConfigError("input", f"file not found: {cfg.input}")
    return cfg


def write_config(cfg: RunConfig, path):
    Path(path).write_text(cfg.to_toml())
