# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled periodic filter-bank kernels (hot loops of the wavelet transform).

The decimated index 2k + t only wraps for the last few outputs, so the bulk
of each row runs without the modulo.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def analysis_periodic(cnp.complex128_t[:, ::1] x, double[::1] lo, double[::1] hi):
    cdef Py_ssize_t batch = x.shape[0]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t half = length // 2
    cdef Py_ssize_t taps = lo.shape[0]
    cdef Py_ssize_t bulk = (length - taps) // 2 + 1 if length >= taps else 0
    a_arr = np.empty((batch, half), dtype=np.complex128)
    d_arr = np.empty((batch, half), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] a = a_arr
    cdef cnp.complex128_t[:, ::1] d = d_arr
    cdef Py_ssize_t b, k, t, base
    cdef double complex acc_a, acc_d, xv
    for b in range(batch):
        for k in range(bulk):
            base = 2 * k
            acc_a = 0
            acc_d = 0
            for t in range(taps):
                xv = x[b, base + t]
                acc_a = acc_a + lo[t] * xv
                acc_d = acc_d + hi[t] * xv
            a[b, k] = acc_a
            d[b, k] = acc_d
        for k in range(bulk, half):
            acc_a = 0
            acc_d = 0
            for t in range(taps):
                xv = x[b, (2 * k + t) % length]
                acc_a = acc_a + lo[t] * xv
                acc_d = acc_d + hi[t] * xv
            a[b, k] = acc_a
            d[b, k] = acc_d
    return a_arr, d_arr


def synthesis_periodic(cnp.complex128_t[:, ::1] a, cnp.complex128_t[:, ::1] d,
                       double[::1] lo, double[::1] hi):
    cdef Py_ssize_t batch = a.shape[0]
    cdef Py_ssize_t half = a.shape[1]
    cdef Py_ssize_t length = 2 * half
    cdef Py_ssize_t taps = lo.shape[0]
    cdef Py_ssize_t bulk = (length - taps) // 2 + 1 if length >= taps else 0
    out_arr = np.zeros((batch, length), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef Py_ssize_t b, k, t, base
    cdef double complex av, dv
    for b in range(batch):
        for k in range(bulk):
            base = 2 * k
            av = a[b, k]
            dv = d[b, k]
            for t in range(taps):
                out[b, base + t] = out[b, base + t] + lo[t] * av + hi[t] * dv
        for k in range(bulk, half):
            av = a[b, k]
            dv = d[b, k]
            for t in range(taps):
                out[b, (2 * k + t) % length] = (
                    out[b, (2 * k + t) % length] + lo[t] * av + hi[t] * dv
                )
    return out_arr
