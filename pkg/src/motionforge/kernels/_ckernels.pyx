# cython: language_level=3
"""Compiled per-pixel kernels. Mirrors _pykernels exactly; see that module
for the contract of each function."""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

NAME = "cython"


def dilate(bits, int radius):
    if radius < 1:
        raise ValueError("radius must be >= 1")
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] src = np.ascontiguousarray(bits, dtype=np.uint8)
    return np.asarray(_cheby(src, radius, 1))


def erode(bits, int radius):
    if radius < 1:
        raise ValueError("radius must be >= 1")
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] src = np.ascontiguousarray(bits, dtype=np.uint8)
    return np.asarray(_cheby(src, radius, 0))


@cython.boundscheck(False)
@cython.wraparound(False)
cdef cnp.ndarray[cnp.uint8_t, ndim=2] _cheby(cnp.ndarray[cnp.uint8_t, ndim=2] src, int radius, int mode):
    # mode 1 = dilate (max filter), mode 0 = erode (min filter, border counts unset).
    # Separable: 1D pass over rows then columns.
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] tmp = np.empty((h, w), dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.empty((h, w), dtype=np.uint8)
    cdef Py_ssize_t y, x, k, lo, hi
    cdef cnp.uint8_t acc
    for y in range(h):
        for x in range(w):
            lo = x - radius
            hi = x + radius
            if mode == 1:
                acc = 0
                if lo < 0:
                    lo = 0
                if hi >= w:
                    hi = w - 1
                for k in range(lo, hi + 1):
                    if src[y, k]:
                        acc = 1
                        break
            else:
                acc = 1
                if lo < 0 or hi >= w:
                    acc = 0
                else:
                    for k in range(lo, hi + 1):
                        if not src[y, k]:
                            acc = 0
                            break
            tmp[y, x] = acc
    for y in range(h):
        lo = y - radius
        hi = y + radius
        for x in range(w):
            if mode == 1:
                acc = 0
                for k in range(max(lo, 0), min(hi, h - 1) + 1):
                    if tmp[k, x]:
                        acc = 1
                        break
            else:
                if lo < 0 or hi >= h:
                    acc = 0
                else:
                    acc = 1
                    for k in range(lo, hi + 1):
                        if not tmp[k, x]:
                            acc = 0
                            break
            out[y, x] = acc
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def boundary(bits):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] src = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.zeros((h, w), dtype=np.uint8)
    cdef Py_ssize_t y, x
    for y in range(h):
        for x in range(w):
            if not src[y, x]:
                continue
            if y == 0 or x == 0 or y == h - 1 or x == w - 1:
                out[y, x] = 1
            elif not (src[y - 1, x] and src[y + 1, x] and src[y, x - 1] and src[y, x + 1]):
                out[y, x] = 1
    return np.asarray(out)


cdef inline double _hue(double r, double g, double b, double v, double delta) nogil:
    cdef double hp
    if delta == 0.0:
        return 0.0
    if v == r:
        hp = (g - b) / delta
        hp = hp - 6.0 * (hp // 6.0)  # mod 6
    elif v == g:
        hp = (b - r) / delta + 2.0
    else:
        hp = (r - g) / delta + 4.0
    return hp * 60.0 * (256.0 / 360.0)


@cython.boundscheck(False)
@cython.wraparound(False)
def mean_hsv_diff(a, b):
    if a.shape != b.shape:
        raise ValueError(f"frame shape mismatch: {a.shape} vs {b.shape}")
    cdef cnp.ndarray[cnp.uint8_t, ndim=3] fa = np.ascontiguousarray(a, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=3] fb = np.ascontiguousarray(b, dtype=np.uint8)
    cdef Py_ssize_t h = fa.shape[0], w = fa.shape[1]
    cdef Py_ssize_t y, x
    cdef double r1, g1, b1, r2, g2, b2, v1, v2, mn1, mn2, d1, d2
    cdef double h1, h2, s1, s2, dh, total = 0.0
    for y in range(h):
        for x in range(w):
            r1 = fa[y, x, 0]; g1 = fa[y, x, 1]; b1 = fa[y, x, 2]
            r2 = fb[y, x, 0]; g2 = fb[y, x, 1]; b2 = fb[y, x, 2]
            v1 = max(r1, max(g1, b1)); mn1 = min(r1, min(g1, b1)); d1 = v1 - mn1
            v2 = max(r2, max(g2, b2)); mn2 = min(r2, min(g2, b2)); d2 = v2 - mn2
            s1 = d1 * 255.0 / v1 if v1 > 0.0 else 0.0
            s2 = d2 * 255.0 / v2 if v2 > 0.0 else 0.0
            h1 = _hue(r1, g1, b1, v1, d1)
            h2 = _hue(r2, g2, b2, v2, d2)
            dh = h1 - h2 if h1 >= h2 else h2 - h1
            if 256.0 - dh < dh:
                dh = 256.0 - dh
            total += (dh + (s1 - s2 if s1 >= s2 else s2 - s1) + (v1 - v2 if v1 >= v2 else v2 - v1)) / 3.0
    return total / (h * w)


@cython.boundscheck(False)
@cython.wraparound(False)
def nearest_depth_delta(pts, outer, inner, depth):
    cdef cnp.ndarray[cnp.int64_t, ndim=2] p = np.ascontiguousarray(pts, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] po = np.ascontiguousarray(outer, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] pi = np.ascontiguousarray(inner, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = np.ascontiguousarray(depth, dtype=np.float64)
    if po.shape[0] == 0 or pi.shape[0] == 0:
        raise ValueError("empty candidate set")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(p.shape[0], dtype=np.float64)
    cdef Py_ssize_t i, j, n = p.shape[0], m = po.shape[0], k = pi.shape[0]
    cdef cnp.int64_t y, x, dy, dx, best, dist
    cdef Py_ssize_t bj
    for i in range(n):
        y = p[i, 0]; x = p[i, 1]
        best = -1
        bj = 0
        for j in range(m):
            dy = po[j, 0] - y; dx = po[j, 1] - x
            dist = dy * dy + dx * dx
            if best < 0 or dist < best:
                best = dist
                bj = j
        out[i] = d[po[bj, 0], po[bj, 1]]
        best = -1
        bj = 0
        for j in range(k):
            dy = pi[j, 0] - y; dx = pi[j, 1] - x
            dist = dy * dy + dx * dx
            if best < 0 or dist < best:
                best = dist
                bj = j
        out[i] -= d[pi[bj, 0], pi[bj, 1]]
    return np.asarray(out)
