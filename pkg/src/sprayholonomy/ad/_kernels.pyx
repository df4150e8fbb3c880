# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled jet kernels. Same arithmetic order as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def mul(const double[::1] a, const double[::1] b,
        const cnp.intp_t[::1] pa, const cnp.intp_t[::1] pb, const cnp.intp_t[::1] pc,
        Py_ssize_t npairs, Py_ssize_t size):
    out_arr = np.zeros(size)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p
    for p in range(npairs):
        out[pc[p]] += a[pa[p]] * b[pb[p]]
    return out_arr


def div(const double[::1] a, const double[::1] b,
        const cnp.intp_t[::1] da, const cnp.intp_t[::1] db, const cnp.intp_t[::1] dc,
        const cnp.intp_t[::1] doffs, const cnp.intp_t[::1] moffs,
        Py_ssize_t order, Py_ssize_t size):
    out_arr = np.zeros(size)
    s_arr = np.zeros(size)
    cdef double[::1] out = out_arr
    cdef double[::1] s = s_arr
    cdef double b0 = b[0]
    cdef Py_ssize_t k, p, g
    out[0] = a[0] / b0
    for k in range(1, order + 1):
        for p in range(doffs[k], doffs[k + 1]):
            s[dc[p]] += b[da[p]] * out[db[p]]
        for g in range(moffs[k], moffs[k + 1]):
            out[g] = (a[g] - s[g]) / b0
    return out_arr


def horner(const double[::1] h, const double[::1] coeffs,
           const cnp.intp_t[::1] pa, const cnp.intp_t[::1] pb, const cnp.intp_t[::1] pc,
           const cnp.intp_t[::1] poffs, Py_ssize_t order, Py_ssize_t size):
    acc_arr = np.zeros(size)
    tmp_arr = np.zeros(size)
    cdef double[::1] acc = acc_arr
    cdef double[::1] tmp = tmp_arr
    cdef Py_ssize_t npairs = poffs[order]
    cdef Py_ssize_t k, p, i
    acc[0] = coeffs[order]
    for k in range(order - 1, -1, -1):
        for i in range(size):
            tmp[i] = 0.0
        for p in range(npairs):
            tmp[pc[p]] += acc[pa[p]] * h[pb[p]]
        for i in range(size):
            acc[i] = tmp[i]
        acc[0] += coeffs[k]
    return acc_arr
