"""Pure-Python/numpy kernels, signature-compatible with ``_ckernels``.

The hash encoding and Adam routines are vectorised with numpy. The BVH
traversals are plain per-query Python loops; they are correct but slow and
exist so the package works without a compiler.
"""
import math

import numpy as np

BACKEND = "python"

_PRIMES = np.array([1, 2654435761, 805459861], dtype=np.uint32)
_MAX_COORD = 1.0 - 2.0**-20


def hash_encode_forward(x, params, offsets, scales, shifts, strides, dense, table_lens,
                        out, idx, wts, F, smooth, store_cache, n_threads=1):
    N, d = x.shape
    L = len(offsets) - 1
    n_corners = 1 << d
    xc = np.clip(x.astype(np.float64), 0.0, _MAX_COORD)
    bits = (np.arange(n_corners)[:, None] >> np.arange(d)[None, :]) & 1  # (C, d)
    for l in range(L):
        pos = xc * scales[l] + shifts[l]
        base = np.floor(pos)
        fr = pos - base
        if smooth:
            fr = fr * fr * (3.0 - 2.0 * fr)
        base = base.astype(np.int64)
        corners = base[:, None, :] + bits[None, :, :]  # (N, C, d)
        w = np.where(bits[None, :, :] == 1, fr[:, None, :], 1.0 - fr[:, None, :]).prod(axis=2)
        if dense[l]:
            rows = np.zeros((N, n_corners), dtype=np.int64)
            for i in reversed(range(d)):
                rows = rows * strides[l] + corners[:, :, i]
        else:
            h = np.zeros((N, n_corners), dtype=np.uint32)
            for i in range(d):
                h ^= corners[:, :, i].astype(np.uint32) * _PRIMES[i]
            rows = (h & np.uint32(table_lens[l] - 1)).astype(np.int64)
        table = params[offsets[l]:offsets[l + 1]].reshape(-1, F)
        wd = w.astype(params.dtype)
        out[:, l * F:(l + 1) * F] = np.einsum("nc,ncf->nf", wd, table[rows])
        if store_cache:
            idx[l] = rows
            wts[l] = wd


def hash_encode_backward(idx, wts, dy, grads, offsets, F, n_threads=1):
    L, N, C = idx.shape
    for l in range(L):
        seg = grads[offsets[l]:offsets[l + 1]]
        n_rows = seg.shape[0] // F
        rows = idx[l].ravel()
        w = wts[l].ravel()
        for f in range(F):
            contrib = w * np.repeat(dy[:, l * F + f], C)
            seg[f::F] += np.bincount(rows, weights=contrib, minlength=n_rows).astype(grads.dtype)


def adam_update(p, g, m, v, lr, beta1, beta2, eps, l2, bias1, bias2, skip_zero, n_threads=1):
    sel = g != 0.0 if skip_zero else slice(None)
    gi = g[sel].astype(np.float64) + l2 * p[sel].astype(np.float64)
    mi = beta1 * m[sel].astype(np.float64) + (1.0 - beta1) * gi
    vi = beta2 * v[sel].astype(np.float64) + (1.0 - beta2) * gi * gi
    m[sel] = mi
    v[sel] = vi
    p[sel] = p[sel].astype(np.float64) - lr * (mi / bias1) / (np.sqrt(vi / bias2) + eps)
    touched = int(np.count_nonzero(sel)) if skip_zero else p.shape[0]
    g[...] = 0
    return touched


def _box_dist2(lo, hi, p):
    s = 0.0
    for i in range(3):
        if p[i] < lo[i]:
            s += (lo[i] - p[i]) ** 2
        elif p[i] > hi[i]:
            s += (p[i] - hi[i]) ** 2
    return s


def _point_triangle_dist2(p, t):
    a, b, c = t[0:3], t[3:6], t[6:9]
    ab = [b[i] - a[i] for i in range(3)]
    ac = [c[i] - a[i] for i in range(3)]
    ap = [p[i] - a[i] for i in range(3)]
    dot = lambda u, w: u[0] * w[0] + u[1] * w[1] + u[2] * w[2]
    d1, d2 = dot(ab, ap), dot(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        q = a
    else:
        bp = [p[i] - b[i] for i in range(3)]
        d3, d4 = dot(ab, bp), dot(ac, bp)
        vc = d1 * d4 - d3 * d2
        if d3 >= 0.0 and d4 <= d3:
            q = b
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v = d1 / (d1 - d3)
            q = [a[i] + v * ab[i] for i in range(3)]
        else:
            cp = [p[i] - c[i] for i in range(3)]
            d5, d6 = dot(ab, cp), dot(ac, cp)
            vb = d5 * d2 - d1 * d6
            va = d3 * d6 - d5 * d4
            if d6 >= 0.0 and d5 <= d6:
                q = c
            elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                w = d2 / (d2 - d6)
                q = [a[i] + w * ac[i] for i in range(3)]
            elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                q = [b[i] + w * (c[i] - b[i]) for i in range(3)]
            else:
                denom = 1.0 / (va + vb + vc)
                v, w = vb * denom, vc * denom
                q = [a[i] + ab[i] * v + ac[i] * w for i in range(3)]
    return sum((p[i] - q[i]) ** 2 for i in range(3))


def bvh_closest(q, lo, hi, left, right, start, count, tris, dist, tri, visits, n_threads=1):
    lo_l, hi_l = lo.tolist(), hi.tolist()
    left_l, right_l = left.tolist(), right.tolist()
    start_l, count_l = start.tolist(), count.tolist()
    tris_l = tris.tolist()
    for n, p in enumerate(q.tolist()):
        best, best_tri, n_visits = math.inf, -1, 0
        stack = [0]
        while stack:
            node = stack.pop()
            if _box_dist2(lo_l[node], hi_l[node], p) >= best:
                continue
            n_visits += 1
            if count_l[node] > 0:
                for k in range(start_l[node], start_l[node] + count_l[node]):
                    d2 = _point_triangle_dist2(p, tris_l[k])
                    if d2 < best:
                        best, best_tri = d2, k
            else:
                a, b = left_l[node], right_l[node]
                da = _box_dist2(lo_l[a], hi_l[a], p)
                db = _box_dist2(lo_l[b], hi_l[b], p)
                near, far, dn, df = (a, b, da, db) if da <= db else (b, a, db, da)
                if df < best:
                    stack.append(far)
                if dn < best:
                    stack.append(near)
        dist[n] = math.sqrt(best)
        tri[n] = best_tri
        visits[n] = n_visits


def _ray_box(o, dv, lo, hi):
    t0, t1 = 0.0, math.inf
    for i in range(3):
        if dv[i] == 0.0:
            if o[i] < lo[i] or o[i] > hi[i]:
                return False
        else:
            inv = 1.0 / dv[i]
            ta, tb = (lo[i] - o[i]) * inv, (hi[i] - o[i]) * inv
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
            if t0 > t1:
                return False
    return True


def _ray_triangle(o, dv, t, tol):
    e1 = [t[3] - t[0], t[4] - t[1], t[5] - t[2]]
    e2 = [t[6] - t[0], t[7] - t[1], t[8] - t[2]]
    pv = [dv[1] * e2[2] - dv[2] * e2[1], dv[2] * e2[0] - dv[0] * e2[2], dv[0] * e2[1] - dv[1] * e2[0]]
    det = e1[0] * pv[0] + e1[1] * pv[1] + e1[2] * pv[2]
    if abs(det) < 1e-300:
        return False
    inv = 1.0 / det
    tv = [o[0] - t[0], o[1] - t[1], o[2] - t[2]]
    u = (tv[0] * pv[0] + tv[1] * pv[1] + tv[2] * pv[2]) * inv
    if u < -tol or u > 1.0 + tol:
        return False
    qv = [tv[1] * e1[2] - tv[2] * e1[1], tv[2] * e1[0] - tv[0] * e1[2], tv[0] * e1[1] - tv[1] * e1[0]]
    v = (dv[0] * qv[0] + dv[1] * qv[1] + dv[2] * qv[2]) * inv
    if v < -tol or u + v > 1.0 + tol:
        return False
    return (e2[0] * qv[0] + e2[1] * qv[1] + e2[2] * qv[2]) * inv > 0.0


class _Tree:
    def __init__(self, lo, hi, left, right, start, count, tris):
        self.lo, self.hi = lo.tolist(), hi.tolist()
        self.left, self.right = left.tolist(), right.tolist()
        self.start, self.count = start.tolist(), count.tolist()
        self.tris = tris.tolist()

    def any_hit(self, o, dv, tol):
        stack = [0]
        while stack:
            node = stack.pop()
            if not _ray_box(o, dv, self.lo[node], self.hi[node]):
                continue
            if self.count[node] > 0:
                s = self.start[node]
                for k in range(s, s + self.count[node]):
                    if _ray_triangle(o, dv, self.tris[k], tol):
                        return True
            else:
                stack.append(self.right[node])
                stack.append(self.left[node])
        return False


def bvh_stab_signs(q, dirs, offset, lo, hi, left, right, start, count, tris, out,
                   tol=1e-9, n_threads=1):
    tree = _Tree(lo, hi, left, right, start, count, tris)
    for n, p in enumerate(q.tolist()):
        s = -1
        for dv in dirs[n].tolist():
            o = [p[i] + offset * dv[i] for i in range(3)]
            if not tree.any_hit(o, dv, tol):
                s = 1
                break
        out[n] = s


def bvh_ray_hits(origins, dirs, lo, hi, left, right, start, count, tris, out,
                 tol=1e-9, n_threads=1):
    tree = _Tree(lo, hi, left, right, start, count, tris)
    for n, (o, dv) in enumerate(zip(origins.tolist(), dirs.tolist())):
        out[n] = tree.any_hit(o, dv, tol)
