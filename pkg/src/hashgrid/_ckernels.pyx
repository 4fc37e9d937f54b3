# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, nonecheck=False
"""Compiled hot loops.

Every function here has a pure-Python twin with the same signature in
``_pykernels``; ``_backend`` picks one at import time.
"""
from cython.parallel cimport prange
from libc.math cimport floor, sqrt, fabs, INFINITY
from libc.stdint cimport int32_t, int64_t, uint32_t, uint8_t

ctypedef fused real:
    float
    double

cdef uint32_t PRIME_1 = 1
cdef uint32_t PRIME_2 = 2654435761
cdef uint32_t PRIME_3 = 805459861
cdef double MAX_COORD = 1.0 - 2.0 ** -20

BACKEND = "compiled"


# ---------------------------------------------------------------------------
# hash encoding
# ---------------------------------------------------------------------------

cdef inline int64_t _vertex_row(const int64_t* c, int d, bint dense,
                                int64_t stride, uint32_t mask) noexcept nogil:
    cdef uint32_t h
    if dense:
        if d == 1:
            return c[0]
        elif d == 2:
            return c[0] + stride * c[1]
        return c[0] + stride * (c[1] + stride * c[2])
    h = (<uint32_t>c[0]) * PRIME_1
    if d > 1:
        h ^= (<uint32_t>c[1]) * PRIME_2
    if d > 2:
        h ^= (<uint32_t>c[2]) * PRIME_3
    return <int64_t>(h & mask)


cdef inline void _encode_point(const real* xp, int d, double scale, double shift,
                               int64_t stride, bint dense, uint32_t mask, bint smooth,
                               const real* table, int F, real* out,
                               int32_t* idx_out, real* w_out) noexcept nogil:
    cdef int i, c, f, n_corners = 1 << d
    cdef double pos, xi, fr
    cdef int64_t base[3]
    cdef int64_t corner[3]
    cdef double wlo[3]
    cdef double whi[3]
    cdef double w
    cdef int64_t row
    for i in range(d):
        xi = xp[i]
        if xi < 0.0:
            xi = 0.0
        elif xi > MAX_COORD:
            xi = MAX_COORD
        pos = xi * scale + shift
        base[i] = <int64_t>floor(pos)
        fr = pos - base[i]
        if smooth:
            fr = fr * fr * (3.0 - 2.0 * fr)
        whi[i] = fr
        wlo[i] = 1.0 - fr
    for f in range(F):
        out[f] = 0
    for c in range(n_corners):
        w = 1.0
        for i in range(d):
            if (c >> i) & 1:
                corner[i] = base[i] + 1
                w = w * whi[i]
            else:
                corner[i] = base[i]
                w = w * wlo[i]
        row = _vertex_row(corner, d, dense, stride, mask)
        for f in range(F):
            out[f] += <real>w * table[row * F + f]
        if idx_out != NULL:
            idx_out[c] = <int32_t>row
            w_out[c] = <real>w


def hash_encode_forward(real[:, ::1] x, real[::1] params, int64_t[::1] offsets,
                        double[::1] scales, double[::1] shifts, int64_t[::1] strides,
                        uint8_t[::1] dense, int64_t[::1] table_lens, real[:, ::1] out,
                        int32_t[:, :, ::1] idx, real[:, :, ::1] wts,
                        int F, bint smooth, bint store_cache, int n_threads=1):
    """Encode a batch level by level; optionally record corner rows and weights."""
    cdef Py_ssize_t N = x.shape[0], n
    cdef int d = x.shape[1]
    cdef int L = offsets.shape[0] - 1, l
    cdef uint32_t mask
    cdef int64_t off
    cdef int32_t* ip
    cdef real* wp
    for l in range(L):
        mask = <uint32_t>(table_lens[l] - 1)
        off = offsets[l]
        for n in prange(N, nogil=True, num_threads=n_threads, schedule="static"):
            if store_cache:
                ip = &idx[l, n, 0]
                wp = &wts[l, n, 0]
            else:
                ip = NULL
                wp = NULL
            _encode_point(&x[n, 0], d, scales[l], shifts[l], strides[l], dense[l], mask,
                          smooth, &params[off], F, &out[n, l * F], ip, wp)


cdef inline void _scatter_level(int l, const int32_t[:, :, ::1] idx, const real[:, :, ::1] wts,
                                const real[:, ::1] dy, real* grads, int F) noexcept nogil:
    cdef Py_ssize_t N = idx.shape[1], n
    cdef int C = idx.shape[2], c, f
    cdef int64_t row
    cdef real w
    for n in range(N):
        for c in range(C):
            w = wts[l, n, c]
            row = idx[l, n, c]
            for f in range(F):
                grads[row * F + f] += w * dy[n, l * F + f]


def hash_encode_backward(int32_t[:, :, ::1] idx, real[:, :, ::1] wts, real[:, ::1] dy,
                         real[::1] grads, int64_t[::1] offsets, int F, int n_threads=1):
    """Accumulate table gradients. Threads own whole levels, so rows never race."""
    cdef int L = idx.shape[0], l
    for l in prange(L, nogil=True, num_threads=n_threads, schedule="static", chunksize=1):
        _scatter_level(l, idx, wts, dy, &grads[offsets[l]], F)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def adam_update(real[::1] p, real[::1] g, real[::1] m, real[::1] v, double lr,
                double beta1, double beta2, double eps, double l2,
                double bias1, double bias2, bint skip_zero, int n_threads=1):
    """One Adam step in place; zeroes ``g``. Returns the number of touched entries."""
    cdef Py_ssize_t n, size = p.shape[0], touched = 0
    cdef double gi, mi, vi
    for n in prange(size, nogil=True, num_threads=n_threads, schedule="static"):
        gi = g[n]
        if skip_zero and gi == 0.0:
            continue
        gi = gi + l2 * p[n]
        mi = beta1 * m[n] + (1.0 - beta1) * gi
        vi = beta2 * v[n] + (1.0 - beta2) * gi * gi
        m[n] = <real>mi
        v[n] = <real>vi
        p[n] = <real>(p[n] - lr * (mi / bias1) / (sqrt(vi / bias2) + eps))
        g[n] = 0
        touched += 1
    return touched


# ---------------------------------------------------------------------------
# BVH queries
# ---------------------------------------------------------------------------

cdef inline double _box_dist2(const double* lo, const double* hi, const double* p) noexcept nogil:
    cdef double s = 0.0, e
    cdef int i
    for i in range(3):
        if p[i] < lo[i]:
            e = lo[i] - p[i]
            s += e * e
        elif p[i] > hi[i]:
            e = p[i] - hi[i]
            s += e * e
    return s


cdef inline double _dot(double ax, double ay, double az, double bx, double by, double bz) noexcept nogil:
    return ax * bx + ay * by + az * bz


cdef inline double _point_triangle_dist2(const double* p, const double* t) noexcept nogil:
    # Voronoi-region walk over vertices, edges, then the face interior.
    cdef double ax = t[0], ay = t[1], az = t[2]
    cdef double abx = t[3] - ax, aby = t[4] - ay, abz = t[5] - az
    cdef double acx = t[6] - ax, acy = t[7] - ay, acz = t[8] - az
    cdef double apx = p[0] - ax, apy = p[1] - ay, apz = p[2] - az
    cdef double d1 = _dot(abx, aby, abz, apx, apy, apz)
    cdef double d2 = _dot(acx, acy, acz, apx, apy, apz)
    cdef double bpx, bpy, bpz, cpx, cpy, cpz, d3, d4, d5, d6, va, vb, vc, v, w, denom
    cdef double qx, qy, qz
    if d1 <= 0.0 and d2 <= 0.0:
        qx = ax; qy = ay; qz = az
    else:
        bpx = p[0] - t[3]; bpy = p[1] - t[4]; bpz = p[2] - t[5]
        d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
        d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
        if d3 >= 0.0 and d4 <= d3:
            qx = t[3]; qy = t[4]; qz = t[5]
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                v = d1 / (d1 - d3)
                qx = ax + v * abx; qy = ay + v * aby; qz = az + v * abz
            else:
                cpx = p[0] - t[6]; cpy = p[1] - t[7]; cpz = p[2] - t[8]
                d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
                d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
                if d6 >= 0.0 and d5 <= d6:
                    qx = t[6]; qy = t[7]; qz = t[8]
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        w = d2 / (d2 - d6)
                        qx = ax + w * acx; qy = ay + w * acy; qz = az + w * acz
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                            qx = t[3] + w * (t[6] - t[3])
                            qy = t[4] + w * (t[7] - t[4])
                            qz = t[5] + w * (t[8] - t[5])
                        else:
                            denom = 1.0 / (va + vb + vc)
                            v = vb * denom
                            w = vc * denom
                            qx = ax + abx * v + acx * w
                            qy = ay + aby * v + acy * w
                            qz = az + abz * v + acz * w
    qx = p[0] - qx; qy = p[1] - qy; qz = p[2] - qz
    return qx * qx + qy * qy + qz * qz


cdef inline void _closest_one(const double* p, const double[:, ::1] lo, const double[:, ::1] hi,
                              const int32_t[::1] left, const int32_t[::1] right,
                              const int32_t[::1] start, const int32_t[::1] count,
                              const double[:, ::1] tris, double* best_out,
                              int64_t* tri_out, int32_t* visits_out) noexcept nogil:
    cdef int32_t stack[128]
    cdef int sp = 1, node, k, a, b
    cdef double best = INFINITY, dist2, da, db
    cdef int64_t best_tri = -1
    cdef int32_t visits = 0
    stack[0] = 0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _box_dist2(&lo[node, 0], &hi[node, 0], p) >= best:
            continue
        visits += 1
        if count[node] > 0:
            for k in range(start[node], start[node] + count[node]):
                dist2 = _point_triangle_dist2(p, &tris[k, 0])
                if dist2 < best:
                    best = dist2
                    best_tri = k
        else:
            a = left[node]
            b = right[node]
            da = _box_dist2(&lo[a, 0], &hi[a, 0], p)
            db = _box_dist2(&lo[b, 0], &hi[b, 0], p)
            # push the far child first so the near one is popped next
            if da <= db:
                if db < best:
                    stack[sp] = b; sp += 1
                if da < best:
                    stack[sp] = a; sp += 1
            else:
                if da < best:
                    stack[sp] = a; sp += 1
                if db < best:
                    stack[sp] = b; sp += 1
    best_out[0] = sqrt(best)
    tri_out[0] = best_tri
    visits_out[0] = visits


def bvh_closest(double[:, ::1] q, double[:, ::1] lo, double[:, ::1] hi, int32_t[::1] left,
                int32_t[::1] right, int32_t[::1] start, int32_t[::1] count, double[:, ::1] tris,
                double[::1] dist, int64_t[::1] tri, int32_t[::1] visits, int n_threads=1):
    """Exact unsigned distance by branch and bound. ``tris`` rows are flattened (9,)."""
    cdef Py_ssize_t n, Q = q.shape[0]
    for n in prange(Q, nogil=True, num_threads=n_threads, schedule="dynamic", chunksize=64):
        _closest_one(&q[n, 0], lo, hi, left, right, start, count, tris,
                     &dist[n], &tri[n], &visits[n])


cdef inline bint _ray_box(const double* o, const double* dv, const double* inv,
                          const double* lo, const double* hi, double tmax) noexcept nogil:
    cdef double t0 = 0.0, t1 = tmax, ta, tb, tmp
    cdef int i
    for i in range(3):
        if dv[i] == 0.0:
            if o[i] < lo[i] or o[i] > hi[i]:
                return False
        else:
            ta = (lo[i] - o[i]) * inv[i]
            tb = (hi[i] - o[i]) * inv[i]
            if ta > tb:
                tmp = ta; ta = tb; tb = tmp
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            if t0 > t1:
                return False
    return True


cdef inline bint _ray_triangle(const double* o, const double* dv, const double* t,
                               double tol) noexcept nogil:
    cdef double e1x = t[3] - t[0], e1y = t[4] - t[1], e1z = t[5] - t[2]
    cdef double e2x = t[6] - t[0], e2y = t[7] - t[1], e2z = t[8] - t[2]
    cdef double px = dv[1] * e2z - dv[2] * e2y
    cdef double py = dv[2] * e2x - dv[0] * e2z
    cdef double pz = dv[0] * e2y - dv[1] * e2x
    cdef double det = e1x * px + e1y * py + e1z * pz
    cdef double inv, tx, ty, tz, u, v, qx, qy, qz, th
    if fabs(det) < 1e-300:
        return False
    inv = 1.0 / det
    tx = o[0] - t[0]; ty = o[1] - t[1]; tz = o[2] - t[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -tol or u > 1.0 + tol:
        return False
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dv[0] * qx + dv[1] * qy + dv[2] * qz) * inv
    if v < -tol or u + v > 1.0 + tol:
        return False
    th = (e2x * qx + e2y * qy + e2z * qz) * inv
    return th > 0.0


cdef inline bint _any_hit(const double* o, const double* dv, const double[:, ::1] lo,
                          const double[:, ::1] hi, const int32_t[::1] left,
                          const int32_t[::1] right, const int32_t[::1] start,
                          const int32_t[::1] count, const double[:, ::1] tris,
                          double tol) noexcept nogil:
    cdef int32_t stack[128]
    cdef int sp = 1, node, k, i
    cdef double inv[3]
    for i in range(3):
        inv[i] = 1.0 / dv[i] if dv[i] != 0.0 else 0.0
    stack[0] = 0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _ray_box(o, dv, inv, &lo[node, 0], &hi[node, 0], INFINITY):
            continue
        if count[node] > 0:
            for k in range(start[node], start[node] + count[node]):
                if _ray_triangle(o, dv, &tris[k, 0], tol):
                    return True
        else:
            stack[sp] = right[node]; sp += 1
            stack[sp] = left[node]; sp += 1
    return False


cdef inline bint _escapes(const double* p, const double* dv, double offset,
                          const double[:, ::1] lo, const double[:, ::1] hi,
                          const int32_t[::1] left, const int32_t[::1] right,
                          const int32_t[::1] start, const int32_t[::1] count,
                          const double[:, ::1] tris, double tol) noexcept nogil:
    cdef double o[3]
    o[0] = p[0] + offset * dv[0]
    o[1] = p[1] + offset * dv[1]
    o[2] = p[2] + offset * dv[2]
    return not _any_hit(o, dv, lo, hi, left, right, start, count, tris, tol)


def bvh_stab_signs(double[:, ::1] q, double[:, :, ::1] dirs, double offset,
                   double[:, ::1] lo, double[:, ::1] hi, int32_t[::1] left,
                   int32_t[::1] right, int32_t[::1] start, int32_t[::1] count,
                   double[:, ::1] tris, signed char[::1] out, double tol=1e-9,
                   int n_threads=1):
    """+1 if any ray of ``dirs[n]`` escapes without a hit, else -1."""
    cdef Py_ssize_t n, Q = q.shape[0]
    cdef int r, R = dirs.shape[1]
    cdef signed char s
    for n in prange(Q, nogil=True, num_threads=n_threads, schedule="dynamic", chunksize=16):
        s = -1
        for r in range(R):
            if _escapes(&q[n, 0], &dirs[n, r, 0], offset, lo, hi, left, right,
                        start, count, tris, tol):
                s = 1
                break
        out[n] = s


def bvh_ray_hits(double[:, ::1] origins, double[:, ::1] dirs, double[:, ::1] lo,
                 double[:, ::1] hi, int32_t[::1] left, int32_t[::1] right,
                 int32_t[::1] start, int32_t[::1] count, double[:, ::1] tris,
                 uint8_t[::1] out, double tol=1e-9, int n_threads=1):
    """Any-hit test for independent rays over t in (0, inf)."""
    cdef Py_ssize_t n, Q = origins.shape[0]
    for n in prange(Q, nogil=True, num_threads=n_threads, schedule="dynamic", chunksize=64):
        out[n] = _any_hit(&origins[n, 0], &dirs[n, 0], lo, hi, left, right, start, count,
                          tris, tol)
