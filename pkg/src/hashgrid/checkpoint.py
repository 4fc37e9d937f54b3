"""Little-endian binary checkpoints made of tagged sections.

File layout: magic ``HGCK``, u32 version, then sections of
``tag (4 bytes) | u64 payload length | payload``.

- ``HGE1`` hash tables: u32 d, L, T, F; f64 N_min, N_max; u8 interpolation
  (0 linear, 1 smoothstep); u8 float width (4 or 8); then each level's rows.
- ``FRQ1`` frequency encoding: u32 d, n_freq. ``IDN1`` identity: u32 d.
- ``MLP1`` network: u32 in, out, hidden layers, hidden width; u8 output
  activation (0 linear, 1 sigmoid); u8 float width; then per layer the
  row-major (out, in) weights followed by the biases.
- ``ADM1`` optimizer: u64 step; f64 lr, beta1, beta2, eps, l2; u32 group
  count; per group u16 name length, name, u64 size, m then v as f64.
- ``TRN1`` trainer bookkeeping (step, report rows, RNG state) as UTF-8 JSON.

Features are stored as 32-bit floats by default; models kept in 64-bit
precision write 64-bit rows so that resuming stays exact.
"""
from __future__ import annotations

import io
import json
import struct

import numpy as np

from .encoding import HashEncodingConfig
from .mlp import MlpConfig
from .model import FrequencyEncoder, HashEncoder, IdentityEncoder, NeuralField
from .optim import AdamHyper

MAGIC = b"HGCK"
VERSION = 1
_INTERP = {"linear": 0, "smoothstep": 1}
_ACT = {"linear": 0, "sigmoid": 1}


class CheckpointError(ValueError):
    pass


def _float_code(dtype) -> int:
    size = np.dtype(dtype).itemsize
    if size not in (4, 8):
        raise CheckpointError(f"unsupported float width {size}")
    return size


def _float_dtype(code: int):
    if code == 4:
        return np.dtype("<f4")
    if code == 8:
        return np.dtype("<f8")
    raise CheckpointError(f"unsupported float width {code}")


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


def encode_hash_tables(enc: HashEncoder) -> bytes:
    c = enc.cfg
    code = _float_code(enc.tables.dtype)
    head = struct.pack("<4I2d2B", c.dim, c.n_levels, c.table_size, c.n_features,
                       float(c.n_min), float(c.n_max), _INTERP[c.interpolation], code)
    body = b"".join(enc.tables.level(l).astype(_float_dtype(code)).tobytes()
                    for l in range(c.n_levels))
    return _section(b"HGE1", head + body)


def decode_hash_tables(payload: bytes) -> HashEncoder:
    d, L, T, F, n_min, n_max, interp, code = struct.unpack_from("<4I2d2B", payload)
    modes = {v: k for k, v in _INTERP.items()}
    if interp not in modes:
        raise CheckpointError(f"unknown interpolation code {interp}")
    cfg = HashEncodingConfig(n_levels=L, table_size=T, n_features=F, n_min=n_min, n_max=n_max,
                             dim=d, interpolation=modes[interp])
    dt = _float_dtype(code)
    enc = HashEncoder(cfg, None, dt.newbyteorder("="))
    data = np.frombuffer(payload, dtype=dt, offset=struct.calcsize("<4I2d2B"))
    if data.size != enc.tables.size:
        raise CheckpointError("hash table payload size does not match its header")
    enc.tables.params[:] = data
    return enc


def encode_mlp(params) -> bytes:
    c = params.cfg
    code = _float_code(params.dtype)
    head = struct.pack("<4I2B", c.input_width, c.output_width, c.hidden_layers, c.hidden_width,
                       _ACT[c.output_activation], code)
    dt = _float_dtype(code)
    body = b"".join(W.astype(dt).tobytes() + b.astype(dt).tobytes()
                    for W, b in zip(params.W, params.b))
    return _section(b"MLP1", head + body)


def decode_mlp(payload: bytes):
    i, o, layers, width, act, code = struct.unpack_from("<4I2B", payload)
    acts = {v: k for k, v in _ACT.items()}
    if act not in acts:
        raise CheckpointError(f"unknown activation code {act}")
    cfg = MlpConfig(i, o, layers, width, acts[act])
    dt = _float_dtype(code)
    data = np.frombuffer(payload, dtype=dt, offset=struct.calcsize("<4I2B"))
    if data.size != cfg.n_params:
        raise CheckpointError("MLP payload size does not match its header")
    return cfg, dt.newbyteorder("="), data


def _fill_mlp(params, data):
    pos = 0
    for W, b in zip(params.W, params.b):
        W[...] = data[pos:pos + W.size].reshape(W.shape)
        pos += W.size
        b[...] = data[pos:pos + b.size]
        pos += b.size


def encode_encoder(enc) -> bytes:
    if isinstance(enc, HashEncoder):
        return encode_hash_tables(enc)
    if isinstance(enc, FrequencyEncoder):
        return _section(b"FRQ1", struct.pack("<2I", enc.dim, enc.n_freq))
    if isinstance(enc, IdentityEncoder):
        return _section(b"IDN1", struct.pack("<I", enc.dim))
    raise CheckpointError(f"encoder kind {enc.kind!r} cannot be checkpointed")


def encode_adam(state, hyper: AdamHyper) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<Q5dI", state.step, hyper.lr, hyper.beta1, hyper.beta2, hyper.eps,
                          hyper.l2, len(state.groups)))
    for g in state.groups:
        name = g.name.encode()
        out.write(struct.pack("<H", len(name)) + name + struct.pack("<Q", g.params.size))
        out.write(g.m.astype("<f8").tobytes())
        out.write(g.v.astype("<f8").tobytes())
    return _section(b"ADM1", out.getvalue())


def decode_adam(payload: bytes):
    step, lr, b1, b2, eps, l2, n = struct.unpack_from("<Q5dI", payload)
    pos = struct.calcsize("<Q5dI")
    groups = {}
    for _ in range(n):
        (ln,) = struct.unpack_from("<H", payload, pos)
        pos += 2
        name = payload[pos:pos + ln].decode()
        pos += ln
        (size,) = struct.unpack_from("<Q", payload, pos)
        pos += 8
        m = np.frombuffer(payload, "<f8", size, pos)
        pos += 8 * size
        v = np.frombuffer(payload, "<f8", size, pos)
        pos += 8 * size
        groups[name] = (m, v)
    return step, AdamHyper(lr, b1, b2, eps, l2), groups


def read_sections(blob: bytes) -> dict:
    if blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos, out = 8, {}
    while pos < len(blob):
        if pos + 12 > len(blob):
            raise CheckpointError("truncated section header")
        tag = blob[pos:pos + 4]
        (n,) = struct.unpack_from("<Q", blob, pos + 4)
        pos += 12
        if pos + n > len(blob):
            raise CheckpointError(f"truncated section {tag!r}")
        out[tag.decode("ascii")] = blob[pos:pos + n]
        pos += n
    return out


def model_to_bytes(model: NeuralField) -> bytes:
    return MAGIC + struct.pack("<I", VERSION) + encode_encoder(model.encoder) + encode_mlp(model.mlp)


def model_from_sections(sec: dict) -> NeuralField:
    if "MLP1" not in sec:
        raise CheckpointError("checkpoint has no MLP1 section")
    cfg, dt, data = decode_mlp(sec["MLP1"])
    if "HGE1" in sec:
        enc = decode_hash_tables(sec["HGE1"])
    elif "FRQ1" in sec:
        d, n = struct.unpack("<2I", sec["FRQ1"])
        enc = FrequencyEncoder(d, n, dt)
    elif "IDN1" in sec:
        (d,) = struct.unpack("<I", sec["IDN1"])
        enc = IdentityEncoder(d, dt)
    else:
        raise CheckpointError("checkpoint has no encoder section")
    model = NeuralField(enc, cfg, 0, dt)
    _fill_mlp(model.mlp, data)
    return model


def save_model(path, model: NeuralField):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> NeuralField:
    with open(path, "rb") as fh:
        return model_from_sections(read_sections(fh.read()))


def save_checkpoint(path, trainer):
    """Model, optimizer moments and trainer bookkeeping, enough to resume exactly."""
    blob = model_to_bytes(trainer.model) + encode_adam(trainer.opt, trainer.hyper)
    blob += _section(b"TRN1", json.dumps(trainer.extra_state()).encode())
    with open(path, "wb") as fh:
        fh.write(blob)


def load_checkpoint(path, trainer):
    """Restore a checkpoint into a trainer built from the same run configuration."""
    with open(path, "rb") as fh:
        sec = read_sections(fh.read())
    saved = model_from_sections(sec)
    for src, dst in zip(saved.param_groups(), trainer.model.param_groups()):
        if src.name != dst.name or src.params.size != dst.params.size:
            raise CheckpointError("checkpoint does not match the trainer's model")
        dst.params[:] = src.params
    step, hyper, groups = decode_adam(sec["ADM1"])
    for g in trainer.opt.groups:
        if g.name not in groups:
            raise CheckpointError(f"checkpoint lacks optimizer state for {g.name!r}")
        m, v = groups[g.name]
        g.m[:] = m
        g.v[:] = v
    trainer.opt.step = step
    trainer.hyper = hyper
    trainer.load_extra_state(json.loads(sec["TRN1"].decode()))
    return trainer
