"""Per-stage timings of one training step at desk-scale sizes.

Run with ``python benchmarks/bench_kernels.py [--threads N]``; set
HASHGRID_PURE_PYTHON=1 to time the fallback kernels.
"""
import argparse
import time

import numpy as np

from hashgrid._backend import BACKEND
from hashgrid.encoding import HashEncodingConfig
from hashgrid.geometry.bvh import Bvh
from hashgrid.geometry.mesh import icosphere
from hashgrid.geometry.sampling import stab_ray_directions
from hashgrid.mlp import MlpConfig
from hashgrid.model import HashEncoder, NeuralField
from hashgrid.optim import AdamHyper, AdamState, adam_step
from hashgrid.pcg import PCG32


def timed(fn, repeat=5):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat * 1e3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--batch", type=int, default=2**14)
    args = ap.parse_args()
    n, th = args.batch, args.threads
    print(f"backend {BACKEND}, batch {n}, threads {th}")

    cfg = HashEncodingConfig(16, 2**14, 2, 16, 128, 2)
    enc = HashEncoder(cfg, np.random.default_rng(0))
    model = NeuralField(enc, MlpConfig(32, 3, 2, 64, "sigmoid"))
    X = np.random.default_rng(1).random((n, 2)).astype(np.float32)
    Y, cache = enc.forward(X, True, th)
    out, mcache = model.forward(X, True, th)
    dout = np.ones_like(out) / out.size
    st = AdamState(model.param_groups())
    rows = [
        ("encode forward", timed(lambda: enc.forward(X, True, th))),
        ("encode backward", timed(lambda: enc.backward(cache, np.ones_like(Y), th))),
        ("model forward", timed(lambda: model.forward(X, True, th))),
        ("model backward", timed(lambda: model.backward(mcache, dout, th))),
        ("adam step", timed(lambda: adam_step(st, AdamHyper(), n_threads=th))),
    ]
    mesh = icosphere(4).normalized()
    bvh = Bvh(mesh)
    rng = PCG32(0)
    q = rng.random((2**11, 3))
    dirs = stab_ray_directions(rng, len(q))
    rows += [
        ("bvh closest (2^11 pts)", timed(lambda: bvh.closest(q, th))),
        ("stab signs (2^11 x 32 rays)", timed(lambda: bvh.stab_signs(q, dirs, 1e-6, th))),
    ]
    for name, ms in rows:
        print(f"{name:32s} {ms:9.2f} ms")


if __name__ == "__main__":
    main()
