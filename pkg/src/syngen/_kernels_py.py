"""Pure numpy implementations of the hot numeric kernels.

This is the fallback backend; `syngen._ckernels` implements the same
signatures in Cython. Everything is float64 and 2-D (elementwise kernels
accept any shape).

Row reductions in the softmax kernels go through `cumsum` instead of
`np.sum`: cumsum accumulates strictly left to right, so appending
fully-masked (-inf) columns to a row leaves the prefix of the output
bit-identical (np.sum's pairwise tree and BLAS gemv both reassociate
when the row length changes). The decoder's causality guarantees rely
on this.
"""

import numpy as np

NAME = "python"


def matmul(a, b):
    return np.dot(a, b)


def matmul_nt(a, b):
    """a @ b.T without materializing the transpose."""
    return np.dot(a, b.T)


def matmul_tn(a, b):
    """a.T @ b without materializing the transpose."""
    return np.dot(a.T, b)


def _row_sums(m):
    # Sequential accumulation; see module docstring for why not np.sum.
    return np.cumsum(m, axis=1)[:, -1]


def softmax_rows(x):
    mx = np.max(x, axis=1, keepdims=True)
    ex = np.exp(x - mx)
    return ex / _row_sums(ex)[:, None]


def softmax_rows_backward(y, gy):
    dot = _row_sums(y * gy)
    return y * (gy - dot[:, None])


def log_softmax_rows(x):
    mx = np.max(x, axis=1, keepdims=True)
    ex = np.exp(x - mx)
    return (x - mx) - np.log(_row_sums(ex))[:, None]


def log_softmax_rows_backward(logy, gy):
    return gy - np.exp(logy) * _row_sums(gy)[:, None]


def leaky_relu(x, slope):
    return np.where(x >= 0.0, x, slope * x)


def leaky_relu_backward(x, gy, slope):
    return np.where(x >= 0.0, gy, slope * gy)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, gy):
    return np.where(x > 0.0, gy, 0.0)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y, gy):
    return gy * y * (1.0 - y)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    """One bias-corrected Adam update, in place on param/m/v."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** step)
    vhat = v / (1.0 - beta2 ** step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
