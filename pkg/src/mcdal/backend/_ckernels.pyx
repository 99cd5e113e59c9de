# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: same API as py_kernels, plain C loops over float64.

Loop orders are fixed (row-major, innermost over columns) so results are
deterministic for a given build; no FMA contraction (see setup.py flags).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

NAME = "cython"


def matmul(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, t
    cdef double aik
    for i in range(m):
        for t in range(k):
            aik = a[i, t]
            for j in range(n):
                c[i, j] += aik * b[t, j]
    return out


def matmul_at_b(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    out = np.zeros((k, n))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, t
    cdef double ait
    for i in range(m):
        for t in range(k):
            ait = a[i, t]
            for j in range(n):
                c[t, j] += ait * b[i, j]
    return out


def matmul_a_bt(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[0]
    out = np.empty((m, n))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, t
    cdef double acc
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[j, t]
            c[i, j] = acc
    return out


def add_rowvec(double[:, ::1] m, double[::1] v):
    cdef Py_ssize_t rows = m.shape[0], cols = m.shape[1]
    out = np.empty((rows, cols))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j
    for i in range(rows):
        for j in range(cols):
            c[i, j] = m[i, j] + v[j]
    return out


def relu(double[:, ::1] x):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1]
    out = np.empty((rows, cols))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j
    for i in range(rows):
        for j in range(cols):
            c[i, j] = x[i, j] if x[i, j] > 0.0 else 0.0
    return out


def relu_backward(double[:, ::1] x, double[:, ::1] g):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1]
    out = np.empty((rows, cols))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j
    for i in range(rows):
        for j in range(cols):
            c[i, j] = g[i, j] if x[i, j] > 0.0 else 0.0
    return out


def softmax_rows(double[:, ::1] x):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1]
    out = np.empty((rows, cols))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j
    cdef double mx, s
    for i in range(rows):
        mx = x[i, 0]
        for j in range(1, cols):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(cols):
            c[i, j] = exp(x[i, j] - mx)
            s += c[i, j]
        for j in range(cols):
            c[i, j] /= s
    return out


def softmax_backward(double[:, ::1] p, double[:, ::1] gp):
    cdef Py_ssize_t rows = p.shape[0], cols = p.shape[1]
    out = np.empty((rows, cols))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(rows):
        dot = 0.0
        for j in range(cols):
            dot += gp[i, j] * p[i, j]
        for j in range(cols):
            c[i, j] = p[i, j] * (gp[i, j] - dot)
    return out


def scaled_add(double[:, ::1] a, double s, double[:, ::1] b):
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    out = np.empty((rows, cols))
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j
    for i in range(rows):
        for j in range(cols):
            c[i, j] = a[i, j] + s * b[i, j]
    return out


def scaled_add_vec(double[::1] a, double s, double[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    out = np.empty(n)
    cdef double[::1] c = out
    cdef Py_ssize_t i
    for i in range(n):
        c[i] = a[i] + s * b[i]
    return out


def ce_grad(double[:, ::1] p, cnp.int64_t[::1] labels):
    cdef Py_ssize_t rows = p.shape[0], cols = p.shape[1]
    out = np.empty((rows, cols))
    cdef double[:, ::1] c = out
    cdef double inv_n = 1.0 / rows
    cdef Py_ssize_t i, j
    for i in range(rows):
        for j in range(cols):
            c[i, j] = p[i, j] * inv_n
        c[i, labels[i]] -= inv_n
    return out
