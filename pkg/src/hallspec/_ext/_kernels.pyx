# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused per-mode and per-point loops for the spectral core.

Every routine here has a NumPy twin in ``hallspec._kernels_py`` with the
same signature; results agree to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs

cnp.import_array()


def leray_project(const double complex[:, :, :, ::1] c,
                  const double[::1] kx, const double[::1] ky,
                  const double[::1] kz):
    cdef Py_ssize_t n0 = c.shape[1], n1 = c.shape[2], n2 = c.shape[3]
    out_arr = np.empty((3, n0, n1, n2), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double a, b, d, ksq
    cdef double complex dot
    for i in range(n0):
        a = kx[i]
        for j in range(n1):
            b = ky[j]
            for k in range(n2):
                d = kz[k]
                ksq = a * a + b * b + d * d
                if ksq == 0.0:
                    out[0, i, j, k] = 0
                    out[1, i, j, k] = 0
                    out[2, i, j, k] = 0
                    continue
                dot = (a * c[0, i, j, k] + b * c[1, i, j, k] + d * c[2, i, j, k]) / ksq
                out[0, i, j, k] = c[0, i, j, k] - a * dot
                out[1, i, j, k] = c[1, i, j, k] - b * dot
                out[2, i, j, k] = c[2, i, j, k] - d * dot
    return out_arr


def cross(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[1], i
    out_arr = np.empty((3, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(m):
        out[0, i] = a[1, i] * b[2, i] - a[2, i] * b[1, i]
        out[1, i] = a[2, i] * b[0, i] - a[0, i] * b[2, i]
        out[2, i] = a[0, i] * b[1, i] - a[1, i] * b[0, i]
    return out_arr


cdef inline double _pow_half(double s, int mode, double half) nogil:
    # |v|^p from s = |v|^2, avoiding pow() for the common exponents
    if mode == 1:
        return sqrt(s)
    if mode == 2:
        return s
    if mode == 3:
        return s * sqrt(s)
    if mode == 4:
        return s * s
    return pow(s, half) if s > 0.0 else 0.0


cdef inline int _mode(double p):
    if p == 1.0 or p == 2.0 or p == 3.0 or p == 4.0:
        return <int>p
    return 0


def norm_pow_sum(const double[:, ::1] v, double p):
    cdef Py_ssize_t nc = v.shape[0], m = v.shape[1], i, c
    cdef double s, acc = 0.0, half = 0.5 * p
    cdef int mode = _mode(p)
    with nogil:
        for i in range(m):
            s = 0.0
            for c in range(nc):
                s += v[c, i] * v[c, i]
            acc += _pow_half(s, mode, half)
    return acc


def norm_max(const double[:, ::1] v):
    cdef Py_ssize_t nc = v.shape[0], m = v.shape[1], i, c
    cdef double s, best = 0.0
    for i in range(m):
        s = 0.0
        for c in range(nc):
            s += v[c, i] * v[c, i]
        if s > best:
            best = s
    return sqrt(best)


def lr_accumulate(double[::1] acc, const double[:, ::1] v, double weight, double r):
    """acc += (weight * |v(x)|)**r pointwise; r == inf takes the running max."""
    cdef Py_ssize_t nc = v.shape[0], m = v.shape[1], i, c
    cdef double s, t, wr = pow(weight, r) if r != float("inf") else weight
    cdef bint is_inf = r == float("inf")
    cdef int mode = _mode(r)
    with nogil:
        for i in range(m):
            s = 0.0
            for c in range(nc):
                s += v[c, i] * v[c, i]
            if is_inf:
                t = weight * sqrt(s)
                if t > acc[i]:
                    acc[i] = t
            else:
                acc[i] += wr * _pow_half(s, mode, 0.5 * r)
