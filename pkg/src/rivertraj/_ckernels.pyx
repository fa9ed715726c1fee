# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry kernels. Same contracts as ``rivertraj._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, fmod, hypot, sin, cos, sqrt, M_PI

cnp.import_array()

cdef double DEG = 180.0 / M_PI
cdef double RAD = M_PI / 180.0


cdef inline double _wrap360(double x) nogil:
    cdef double r = fmod(x, 360.0)
    if r < 0.0:
        r += 360.0
    if r >= 360.0:
        r = 0.0
    return r


cdef inline double _cog_diff(double c1, double c2) nogil:
    cdef double d = _wrap360(c2 - c1)
    if d > 180.0:
        d -= 360.0
    return d


cdef inline double _bearing(double dx, double dy) nogil:
    return _wrap360(atan2(dx, dy) * DEG)


def cog_diff(c1, c2):
    a, b = np.broadcast_arrays(np.asarray(c1, dtype=np.float64), np.asarray(c2, dtype=np.float64))
    cdef double[::1] x = np.ascontiguousarray(a).ravel()
    cdef double[::1] y = np.ascontiguousarray(b).ravel()
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            o[i] = _cog_diff(x[i], y[i])
    return out.reshape(a.shape)


def bearings(dx, dy):
    a, b = np.broadcast_arrays(np.asarray(dx, dtype=np.float64), np.asarray(dy, dtype=np.float64))
    cdef double[::1] x = np.ascontiguousarray(a).ravel()
    cdef double[::1] y = np.ascontiguousarray(b).ravel()
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            o[i] = _bearing(x[i], y[i])
    return out.reshape(a.shape)


def steps_batch(positions):
    cdef double[:, :, ::1] pos = np.ascontiguousarray(positions, dtype=np.float64)
    cdef Py_ssize_t b = pos.shape[0], k = pos.shape[1], i, t
    seed = np.empty(b)
    dist = np.empty((b, k - 1))
    change = np.zeros((b, k - 1))
    cdef double[::1] s = seed
    cdef double[:, ::1] d = dist
    cdef double[:, ::1] c = change
    cdef double dx, dy, prev, cur
    with nogil:
        for i in range(b):
            prev = 0.0
            for t in range(k - 1):
                dx = pos[i, t + 1, 0] - pos[i, t, 0]
                dy = pos[i, t + 1, 1] - pos[i, t, 1]
                d[i, t] = hypot(dx, dy)
                cur = _bearing(dx, dy)
                if t == 0:
                    s[i] = cur
                else:
                    c[i, t - 1] = _cog_diff(prev, cur)
                prev = cur
    return seed, dist, change


def reconstruct_batch(seed_pos, seed_cog, distance, cog_change):
    cdef double[:, ::1] sp = np.ascontiguousarray(seed_pos, dtype=np.float64)
    cdef double[::1] sc = np.ascontiguousarray(seed_cog, dtype=np.float64)
    cdef double[:, ::1] d = np.ascontiguousarray(distance, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(cog_change, dtype=np.float64)
    cdef Py_ssize_t b = d.shape[0], k = d.shape[1], i, t
    out = np.empty((b, k, 2))
    cdef double[:, :, ::1] o = out
    cdef double h, x, y
    with nogil:
        for i in range(b):
            h = _wrap360(sc[i])
            x = sp[i, 0]
            y = sp[i, 1]
            for t in range(k):
                if t > 0:
                    h = _wrap360(h + c[i, t - 1])
                x = x + d[i, t] * sin(h * RAD)
                y = y + d[i, t] * cos(h * RAD)
                o[i, t, 0] = x
                o[i, t, 1] = y
    return out


def project_to_polyline(points, vertices):
    cdef double[:, ::1] p = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    cdef double[:, ::1] v = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], nv = v.shape[0], i, j, best_j
    seg = np.empty(n, dtype=np.int64)
    frac = np.empty(n)
    dist = np.empty(n)
    cdef cnp.int64_t[::1] so = seg
    cdef double[::1] fo = frac
    cdef double[::1] do = dist
    cdef double ax, ay, bx, by, l2, t, rx, ry, d2, best, best_t
    with nogil:
        for i in range(n):
            best = 1e300
            best_t = 0.0
            best_j = 0
            for j in range(nv - 1):
                ax = p[i, 0] - v[j, 0]
                ay = p[i, 1] - v[j, 1]
                bx = v[j + 1, 0] - v[j, 0]
                by = v[j + 1, 1] - v[j, 1]
                l2 = bx * bx + by * by
                t = (ax * bx + ay * by) / l2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                rx = ax - t * bx
                ry = ay - t * by
                d2 = rx * rx + ry * ry
                if d2 < best:
                    best = d2
                    best_t = t
                    best_j = j
            so[i] = best_j
            fo[i] = best_t
            do[i] = sqrt(best)
    return seg, frac, dist
