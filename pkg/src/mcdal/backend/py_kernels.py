"""Numpy reference implementations of the hot kernels.

This is the fallback backend: always importable, vectorized numpy. The
compiled backend (``_ckernels``) implements the same API with plain C loops.
Both operate on C-contiguous float64 arrays and perform no validation; the
public wrappers in :mod:`mcdal.numeric` own the error contracts.
"""

import numpy as np

NAME = "numpy"


def matmul(a, b):
    """(m, k) @ (k, n) -> (m, n)."""
    return a @ b


def matmul_at_b(a, b):
    """a.T @ b for a (m, k), b (m, n) -> (k, n). Weight-gradient shape."""
    return a.T @ b


def matmul_a_bt(a, b):
    """a @ b.T for a (m, k), b (n, k) -> (m, n). Input-gradient shape."""
    return a @ b.T


def add_rowvec(m, v):
    """Broadcast-add a row vector to every row."""
    return m + v


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, g):
    """Upstream gradient g masked by the ReLU of preactivation x."""
    return np.where(x > 0.0, g, 0.0)


def softmax_rows(x):
    """Row-wise softmax with per-row max shift."""
    if x.shape[0] == 0:
        return x.copy()
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(p, gp):
    """Gradient w.r.t. logits given probabilities p and dL/dp."""
    return p * (gp - (gp * p).sum(axis=1, keepdims=True))


def scaled_add(a, s, b):
    """a + s * b, elementwise."""
    return a + s * b


def scaled_add_vec(a, s, b):
    """1-D variant of scaled_add (bias updates)."""
    return a + s * b


def ce_grad(p, labels):
    """Batch-mean cross-entropy gradient w.r.t. logits: (p - onehot) / n."""
    n = p.shape[0]
    g = p.copy()
    g[np.arange(n), labels] -= 1.0
    g /= n
    return g
