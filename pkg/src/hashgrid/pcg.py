"""PCG32 (XSH-RR 64/32) with vectorised block generation.

Blocks of outputs are produced by jumping the LCG state directly:
``s_k = A_k * s_0 + inc * G_k (mod 2**64)`` with ``A_k = a**k`` and
``G_k = sum_{j<k} a**j``, so numpy never loops per sample.
"""
from __future__ import annotations

import numpy as np

MULT = 6364136223846793005
_MASK64 = (1 << 64) - 1
_BLOCK = 1 << 14


def _jump_tables(n: int):
    a = np.zeros(n, dtype=np.uint64)
    g = np.zeros(n, dtype=np.uint64)
    a[0] = 1
    m, am, gm = 1, MULT, 1  # a**m and G_m as Python ints
    while m < n:
        k = min(m, n - m)
        # a^(m+j) = a^j a^m ; G_(m+j) = G_j a^m + G_m
        a[m:m + k] = a[:k] * np.uint64(am)
        g[m:m + k] = g[:k] * np.uint64(am) + np.uint64(gm)
        gm = (gm * am + gm) & _MASK64
        am = (am * am) & _MASK64
        m *= 2
    return a, g


_A, _G = _jump_tables(_BLOCK + 1)


def _output(old: np.ndarray) -> np.ndarray:
    xorshifted = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)) & np.uint64(0xFFFFFFFF)
    rot = old >> np.uint64(59)
    x = xorshifted.astype(np.uint32)
    r = rot.astype(np.uint32)
    return (x >> r) | (x << ((np.uint32(32) - r) & np.uint32(31)))


class PCG32:
    """O'Neill's PCG32 generator; ``seed`` picks the start, ``stream`` the sequence."""

    def __init__(self, seed: int = 0x853C49E6748FEA9B, stream: int = 0xDA3E39CB94B95BDB):
        self.inc = ((int(stream) << 1) | 1) & _MASK64
        self.state = 0
        self._step()
        self.state = (self.state + int(seed)) & _MASK64
        self._step()

    def _step(self):
        self.state = (self.state * MULT + self.inc) & _MASK64

    def next_uint32(self, n: int | None = None):
        if n is None:
            return int(self.next_uint32(1)[0])
        out = np.empty(n, dtype=np.uint32)
        done = 0
        while done < n:
            k = min(_BLOCK, n - done)
            s0 = np.uint64(self.state)
            inc = np.uint64(self.inc)
            old = _A[:k] * s0 + inc * _G[:k]
            out[done:done + k] = _output(old)
            self.state = (int(_A[k]) * self.state + self.inc * int(_G[k])) & _MASK64
            done += k
        return out

    def random(self, size=None) -> np.ndarray | float:
        """Uniform doubles in [0, 1) with 32 random bits each."""
        n = 1 if size is None else int(np.prod(size))
        u = self.next_uint32(n).astype(np.float64) * 2.0**-32
        return float(u[0]) if size is None else u.reshape(size)

    def random_open(self, size) -> np.ndarray:
        """Uniform doubles strictly inside (0, 1)."""
        n = int(np.prod(size))
        return ((self.next_uint32(n).astype(np.float64) + 0.5) * 2.0**-32).reshape(size)

    def integers(self, high: int, size) -> np.ndarray:
        """Uniform integers in [0, high) by multiply-shift on 32-bit draws (bias < high / 2**32)."""
        n = int(np.prod(size))
        u = self.next_uint32(n).astype(np.uint64)
        return ((u * np.uint64(high)) >> np.uint64(32)).astype(np.int64).reshape(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return low + (high - low) * self.random(size)

    def advance(self, delta: int):
        """Skip ``delta`` outputs in O(log delta)."""
        acc_mult, acc_plus = 1, 0
        cur_mult, cur_plus = MULT, self.inc
        delta &= _MASK64
        while delta:
            if delta & 1:
                acc_mult = (acc_mult * cur_mult) & _MASK64
                acc_plus = (acc_plus * cur_mult + cur_plus) & _MASK64
            cur_plus = ((cur_mult + 1) * cur_plus) & _MASK64
            cur_mult = (cur_mult * cur_mult) & _MASK64
            delta >>= 1
        self.state = (acc_mult * self.state + acc_plus) & _MASK64

    def get_state(self) -> dict:
        return {"state": self.state, "inc": self.inc}

    def set_state(self, st: dict):
        self.state = int(st["state"]) & _MASK64
        self.inc = int(st["inc"]) & _MASK64

    @classmethod
    def for_worker(cls, seed: int, worker: int) -> "PCG32":
        return cls(seed, stream=worker)
