# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Mirrors :mod:`bergman_lab._pykernels` exactly."""

import numpy as np

from libc.math cimport hypot, log


cdef inline Py_ssize_t _first_not_below(const double[::1] scales, double x) noexcept nogil:
    # index of the first scale >= x (len(scales) if none)
    cdef Py_ssize_t lo = 0, hi = scales.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if scales[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def box_masses(const double[::1] dre, const double[::1] dim,
               const double[::1] weights,
               const double[::1] cre, const double[::1] cim,
               const double[::1] scales):
    cdef Py_ssize_t n = dre.shape[0], m = cre.shape[0], k = scales.shape[0]
    cdef Py_ssize_t i, j, b
    cdef double cr, ci, dx, dy, dist2, acc, top2
    sq_arr = np.square(np.asarray(scales))
    cdef double[::1] sq = sq_arr
    out_arr = np.zeros((m, k + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if k == 0:
        return out_arr[:, :0]
    top2 = sq[k - 1]
    with nogil:
        for j in range(m):
            cr = cre[j]
            ci = cim[j]
            for i in range(n):
                dx = cr - dre[i]
                dy = ci - dim[i]
                dist2 = dx * dx + dy * dy
                if dist2 > top2:
                    continue
                b = _first_not_below(sq, dist2)
                out[j, b] += weights[i]
            acc = 0.0
            for b in range(k):
                acc += out[j, b]
                out[j, b] = acc
    return out_arr[:, :k]


def blaschke_log_modulus(const double[::1] zre, const double[::1] zim,
                         const double[::1] are, const double[::1] aim):
    """sum_n log|(a_n - z) / (1 - conj(a_n) z)| at every z."""
    cdef Py_ssize_t n = zre.shape[0], m = are.shape[0], i, j
    cdef double x, y, ar, ai, nx, ny, dx, dy, num, prod, acc
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            x = zre[i]
            y = zim[i]
            acc = 0.0
            prod = 1.0
            for j in range(m):
                ar = are[j]
                ai = aim[j]
                nx = ar - x
                ny = ai - y
                # 1 - conj(a) z
                dx = 1.0 - (ar * x + ai * y)
                dy = ai * x - ar * y
                num = nx * nx + ny * ny
                if num < 1e-280:
                    # the squared distance would lose precision or underflow
                    acc += log(hypot(nx, ny))
                    num = 1.0
                prod *= num / (dx * dx + dy * dy)
                # the running product of squared ratios is at most 1; flush before underflow
                if prod < 1e-250:
                    acc += 0.5 * log(prod)
                    prod = 1.0
            out[i] = acc + 0.5 * log(prod)
    return out_arr
