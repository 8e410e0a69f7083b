# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: same signatures as `syngen._kernels_py`.

Matrix products go through BLAS dgemm; the loop kernels exist to cut the
per-call overhead that dominates at the small tensor sizes this package
runs at. Softmax row sums accumulate sequentially so that appending
fully-masked (-inf) columns leaves the prefix of the output bit-identical
(the decoder's causality tests rely on that).
"""

import numpy as np

from libc.math cimport exp, log, sqrt
from scipy.linalg.cython_blas cimport dgemm

NAME = "compiled"


def matmul(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef int m = a.shape[0]
    cdef int k = a.shape[1]
    cdef int n = b.shape[1]
    if b.shape[0] != k:
        raise ValueError("inner dimensions disagree")
    if m == 0 or n == 0 or k == 0:
        return np.zeros((m, n), dtype=np.float64)
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    cdef double[:, ::1] cv = out
    cdef double alpha = 1.0, beta = 0.0
    # Row-major product via the transpose identity: C^T = B^T A^T.
    dgemm("N", "N", &n, &m, &k, &alpha, &bv[0, 0], &n,
          &av[0, 0], &k, &beta, &cv[0, 0], &n)
    return out


def matmul_nt(a, b):
    """a @ b.T without materializing the transpose."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef int m = a.shape[0]
    cdef int k = a.shape[1]
    cdef int n = b.shape[0]
    if b.shape[1] != k:
        raise ValueError("inner dimensions disagree")
    if m == 0 or n == 0 or k == 0:
        return np.zeros((m, n), dtype=np.float64)
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    cdef double[:, ::1] cv = out
    cdef double alpha = 1.0, beta = 0.0
    dgemm("T", "N", &n, &m, &k, &alpha, &bv[0, 0], &k,
          &av[0, 0], &k, &beta, &cv[0, 0], &n)
    return out


def matmul_tn(a, b):
    """a.T @ b without materializing the transpose."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef int k = a.shape[0]
    cdef int m = a.shape[1]
    cdef int n = b.shape[1]
    if b.shape[0] != k:
        raise ValueError("inner dimensions disagree")
    if m == 0 or n == 0 or k == 0:
        return np.zeros((m, n), dtype=np.float64)
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    cdef double[:, ::1] cv = out
    cdef double alpha = 1.0, beta = 0.0
    dgemm("N", "T", &n, &m, &k, &alpha, &bv[0, 0], &n,
          &av[0, 0], &m, &beta, &cv[0, 0], &n)
    return out


def softmax_rows(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    cdef double[:, ::1] xv = x
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, rows = xv.shape[0], cols = xv.shape[1]
    cdef double mx, s
    for i in range(rows):
        mx = xv[i, 0]
        for j in range(1, cols):
            if xv[i, j] > mx:
                mx = xv[i, j]
        s = 0.0
        for j in range(cols):
            ov[i, j] = exp(xv[i, j] - mx)
            s += ov[i, j]
        for j in range(cols):
            ov[i, j] /= s
    return out


def softmax_rows_backward(y, gy):
    y = np.ascontiguousarray(y, dtype=np.float64)
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    out = np.empty_like(y)
    cdef double[:, ::1] yv = y
    cdef double[:, ::1] gv = gy
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, rows = yv.shape[0], cols = yv.shape[1]
    cdef double dot
    for i in range(rows):
        dot = 0.0
        for j in range(cols):
            dot += yv[i, j] * gv[i, j]
        for j in range(cols):
            ov[i, j] = yv[i, j] * (gv[i, j] - dot)
    return out


def log_softmax_rows(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    cdef double[:, ::1] xv = x
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, rows = xv.shape[0], cols = xv.shape[1]
    cdef double mx, s
    for i in range(rows):
        mx = xv[i, 0]
        for j in range(1, cols):
            if xv[i, j] > mx:
                mx = xv[i, j]
        s = 0.0
        for j in range(cols):
            s += exp(xv[i, j] - mx)
        s = log(s)
        for j in range(cols):
            ov[i, j] = xv[i, j] - mx - s
    return out


def log_softmax_rows_backward(logy, gy):
    logy = np.ascontiguousarray(logy, dtype=np.float64)
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    out = np.empty_like(logy)
    cdef double[:, ::1] yv = logy
    cdef double[:, ::1] gv = gy
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, rows = yv.shape[0], cols = yv.shape[1]
    cdef double s
    for i in range(rows):
        s = 0.0
        for j in range(cols):
            s += gv[i, j]
        for j in range(cols):
            ov[i, j] = gv[i, j] - exp(yv[i, j]) * s
    return out


cdef _flat(arr):
    a = np.ascontiguousarray(arr, dtype=np.float64)
    return a, a.reshape(-1)


def leaky_relu(x, double slope):
    x, xf = _flat(x)
    out = np.empty_like(x)
    cdef double[::1] xv = xf
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] if xv[i] >= 0.0 else slope * xv[i]
    return out


def leaky_relu_backward(x, gy, double slope):
    x, xf = _flat(x)
    gy, gf = _flat(gy)
    out = np.empty_like(x)
    cdef double[::1] xv = xf
    cdef double[::1] gv = gf
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = gv[i] if xv[i] >= 0.0 else slope * gv[i]
    return out


def relu(x):
    x, xf = _flat(x)
    out = np.empty_like(x)
    cdef double[::1] xv = xf
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] if xv[i] > 0.0 else 0.0
    return out


def relu_backward(x, gy):
    x, xf = _flat(x)
    gy, gf = _flat(gy)
    out = np.empty_like(x)
    cdef double[::1] xv = xf
    cdef double[::1] gv = gf
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = gv[i] if xv[i] > 0.0 else 0.0
    return out


def sigmoid(x):
    x, xf = _flat(x)
    out = np.empty_like(x)
    cdef double[::1] xv = xf
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double e
    for i in range(n):
        if xv[i] >= 0.0:
            ov[i] = 1.0 / (1.0 + exp(-xv[i]))
        else:
            e = exp(xv[i])
            ov[i] = e / (1.0 + e)
    return out


def sigmoid_backward(y, gy):
    y, yf = _flat(y)
    gy, gf = _flat(gy)
    out = np.empty_like(y)
    cdef double[::1] yv = yf
    cdef double[::1] gv = gf
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, n = yv.shape[0]
    for i in range(n):
        ov[i] = gv[i] * yv[i] * (1.0 - yv[i])
    return out


def adam_update(param, grad, m, v, double lr, double beta1, double beta2,
                double eps, long step):
    """One bias-corrected Adam update, in place on param/m/v."""
    cdef double[::1] pv = param.reshape(-1)
    cdef double[::1] gv = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    cdef double[::1] mv = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double c1 = 1.0 - beta1 ** step
    cdef double c2 = 1.0 - beta2 ** step
    for i in range(n):
        mv[i] = beta1 * mv[i] + (1.0 - beta1) * gv[i]
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gv[i] * gv[i]
        pv[i] -= lr * (mv[i] / c1) / (sqrt(vv[i] / c2) + eps)
