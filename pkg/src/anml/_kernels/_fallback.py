"""Pure numpy versions of the compiled kernels. Same signatures and results."""

import numpy as np


def adam_update(theta, grad, m, v, lr, beta1, beta2, eps, step):
    """In-place Adam step on flat buffers. ``step`` is 1-based."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    theta -= lr * mhat / (np.sqrt(vhat) + eps)


def knn_row_sums(dist, k):
    """Sum of the ``k`` smallest off-diagonal entries of each row."""
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if dist.ndim != 2 or dist.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if k < 1 or k > n - 1:
        raise ValueError("k must satisfy 1 <= k <= n-1")
    off = dist[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    part = np.partition(off, k - 1, axis=1)[:, :k]
    return part.sum(axis=1)
