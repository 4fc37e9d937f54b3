"""Independent reference implementations used only by the tests.

Written directly from the defining formulas with plain Python loops and
integers, sharing no code with the package.
"""
from __future__ import annotations

import math

import numpy as np

PI = (1, 2654435761, 805459861)


def hash_ref(coords, T):
    h = 0
    for c, p in zip(coords, PI):
        h ^= (int(c) * p) % (1 << 32)
    return h % T


def resolutions_ref(L, n_min, n_max):
    if L == 1:
        return [int(math.floor(n_min))]
    b = math.exp((math.log(n_max) - math.log(n_min)) / (L - 1))
    out = []
    for l in range(L):
        v = n_min * b**l
        # guard against representation error just below an integer
        r = round(v)
        out.append(int(r) if abs(v - r) < 1e-9 else int(math.floor(v)))
    return out


def encode_ref(X, level_tables, resolutions, T, smooth=False):
    """Per point, per level, per corner; tables are (rows, F) arrays."""
    X = np.asarray(X, dtype=np.float64)
    N, d = X.shape
    F = level_tables[0].shape[1]
    out = np.zeros((N, len(resolutions) * F))
    for n in range(N):
        for l, (res, table) in enumerate(zip(resolutions, level_tables)):
            shift = 0.5 if smooth else 0.0
            side = res + (2 if smooth else 1)
            dense = side**d <= T
            pos = [min(max(float(X[n, i]), 0.0), 1.0 - 2.0**-20) * res + shift for i in range(d)]
            base = [math.floor(p) for p in pos]
            frac = [p - b for p, b in zip(pos, base)]
            if smooth:
                frac = [f * f * (3 - 2 * f) for f in frac]
            acc = np.zeros(F)
            for corner in range(1 << d):
                w = 1.0
                c = []
                for i in range(d):
                    up = (corner >> i) & 1
                    c.append(base[i] + up)
                    w *= frac[i] if up else 1.0 - frac[i]
                if dense:
                    row, stride = 0, 1
                    for i in range(d):
                        row += c[i] * stride
                        stride *= side
                else:
                    row = hash_ref(c, T)
                acc += w * table[row]
            out[n, l * F:(l + 1) * F] = acc
    return out


def point_triangle_distance_ref(p, a, b, c):
    """Projection onto the plane if inside, else the nearest of the three edges."""
    p, a, b, c = (np.asarray(v, dtype=np.float64) for v in (p, a, b, c))
    n = np.cross(b - a, c - a)
    nn = float(n @ n)
    if nn > 0:
        q = p - ((p - a) @ n) / nn * n
        # barycentric sign test via sub-triangle orientation
        s1 = np.cross(b - a, q - a) @ n
        s2 = np.cross(c - b, q - b) @ n
        s3 = np.cross(a - c, q - c) @ n
        if s1 >= 0 and s2 >= 0 and s3 >= 0:
            return float(np.linalg.norm(p - q))

    def seg(u, v):
        e = v - u
        t = 0.0 if e @ e == 0 else min(1.0, max(0.0, ((p - u) @ e) / (e @ e)))
        return float(np.linalg.norm(p - (u + t * e)))

    return min(seg(a, b), seg(b, c), seg(c, a))


def brute_force_distance(p, corners):
    return min(point_triangle_distance_ref(p, *tri) for tri in corners)


def mlp_ref(weights, biases, Y, sigmoid_out=False):
    """Affine layers with ReLU between them, computed with explicit sums in float64."""
    h = np.asarray(Y, dtype=np.float64)
    for k, (W, b) in enumerate(zip(weights, biases)):
        W = np.asarray(W, dtype=np.float64)
        z = np.einsum("ni,oi->no", h, W) + np.asarray(b, dtype=np.float64)
        h = np.where(z > 0, z, 0.0) if k < len(weights) - 1 else z
    if sigmoid_out:
        h = 1.0 / (1.0 + np.exp(-h))
    return h


def adam_ref(p, g, m, v, t, lr, b1=0.9, b2=0.99, eps=1e-15, l2=0.0):
    g = g + l2 * p
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mh = m / (1 - b1**t)
    vh = v / (1 - b2**t)
    return p - lr * mh / (math.sqrt(vh) + eps), m, v


def central_fd(f, x: np.ndarray, idx, h=1e-6):
    old = x[idx]
    x[idx] = old + h
    fp = f()
    x[idx] = old - h
    fm = f()
    x[idx] = old
    return (fp - fm) / (2 * h)


def pcg32_ref(seed, stream, n):
    """Scalar PCG32 XSH-RR straight from the reference C code."""
    mask = (1 << 64) - 1
    mult = 6364136223846793005
    inc = ((stream << 1) | 1) & mask
    state = 0
    out = []

    def step(s):
        return (s * mult + inc) & mask

    state = step(state)
    state = step((state + seed) & mask)
    for _ in range(n):
        old = state
        state = step(state)
        xs = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        out.append(((xs >> rot) | (xs << ((-rot) & 31))) & 0xFFFFFFFF)
    return out


def box_overlaps_square(lo, hi, z, sq_lo=0.0, sq_hi=1.0):
    """Closed axis-aligned box vs the square [sq_lo, sq_hi]^2 at height z."""
    return (lo[2] <= z <= hi[2]) and lo[0] <= sq_hi and hi[0] >= sq_lo and lo[1] <= sq_hi and hi[1] >= sq_lo


def brute_force_distances(P, corners, chunk=256):
    """Vectorised form of ``point_triangle_distance_ref`` minimised over every triangle."""
    P = np.asarray(P, dtype=np.float64)
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.einsum("ij,ij->i", n, n)
    out = np.empty(len(P))

    def seg(p, u, v):
        e = v - u
        ee = np.einsum("ij,ij->i", e, e)
        t = np.clip(np.einsum("pij,ij->pi", p[:, None] - u[None], e) / np.where(ee > 0, ee, 1), 0, 1)
        return np.linalg.norm(p[:, None] - (u[None] + t[..., None] * e[None]), axis=2)

    for s in range(0, len(P), chunk):
        p = P[s:s + chunk]
        ap = p[:, None] - a[None]
        h = np.einsum("pij,ij->pi", ap, n) / np.where(nn > 0, nn, 1)
        q = p[:, None] - h[..., None] * n[None]
        inside = np.broadcast_to(nn[None] > 0, h.shape).copy()
        for u, v in ((a, b), (b, c), (c, a)):
            inside &= np.einsum("pij,ij->pi", np.cross((v - u)[None], q - u[None]), n) >= 0
        plane = np.where(inside, np.abs(h) * np.sqrt(nn)[None], np.inf)
        edges = np.minimum(np.minimum(seg(p, a, b), seg(p, b, c)), seg(p, c, a))
        out[s:s + chunk] = np.minimum(plane, edges).min(axis=1)
    return out


def convex_inside(P, corners, chunk=4096):
    """Inside test for a closed convex polyhedron: behind every outward face plane."""
    a = corners[:, 0]
    n = np.cross(corners[:, 1] - a, corners[:, 2] - a)
    off = np.einsum("ij,ij->i", n, a)
    out = np.empty(len(P), dtype=bool)
    for s in range(0, len(P), chunk):
        out[s:s + chunk] = np.all(P[s:s + chunk] @ n.T < off[None], axis=1)
    return out
