"""Pure-numpy backend.

Convolution and co-occurrence counting are vectorised; the recurrent and
GloVe loops run the shared sources from ``_loops`` interpreted.
"""
import numpy as np

from ._loops import (conv_backward_loops, conv_forward_loops, glove_epoch, lstm_backward, lstm_forward,  # noqa: F401
                     tree_backward, tree_forward)

MASK64 = (1 << 64) - 1

__all__ = [
    "xoshiro_fill",
    "conv_forward",
    "conv_backward",
    "tree_forward",
    "tree_backward",
    "lstm_forward",
    "lstm_backward",
    "cooccur_pairs",
    "glove_epoch",
]


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


def xoshiro_fill(state, out):
    """Fill ``out`` with uniform doubles in [0, 1) from xoshiro256**,
    advancing the uint64[4] ``state`` in place."""
    s0, s1, s2, s3 = (int(v) for v in state)
    flat = out.reshape(-1)
    for k in range(flat.shape[0]):
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        flat[k] = (result >> 11) * 2.0**-53
    state[0], state[1], state[2], state[3] = s0, s1, s2, s3


def _im2col(X, width):
    d, n = X.shape
    pad = width // 2
    Xp = np.zeros((d, n + 2 * pad))
    Xp[:, pad:pad + n] = X
    cols = np.empty((d, width, n))
    for k in range(width):
        cols[:, k, :] = Xp[:, k:k + n]
    return cols.reshape(d * width, n)


def conv_forward(X, W, b):
    """Half-padded unit-stride convolution of one filter group.

    X is d x n, W is (m, d, width), b is (m,). Returns the m x n pre-activation.
    """
    m, d, width = W.shape
    return W.reshape(m, d * width) @ _im2col(X, width) + b[:, None]


def conv_backward(X, W, dZ):
    m, d, width = W.shape
    n = X.shape[1]
    pad = width // 2
    cols = _im2col(X, width)
    dW = (dZ @ cols.T).reshape(m, d, width)
    db = dZ.sum(axis=1)
    dcols = (W.reshape(m, d * width).T @ dZ).reshape(d, width, n)
    dXp = np.zeros((d, n + 2 * pad))
    for k in range(width):
        dXp[:, k:k + n] += dcols[:, k, :]
    return dXp[:, pad:pad + n], dW, db


def cooccur_pairs(ids, doc, window, vocab_size):
    """Distance-weighted co-occurrence counts.

    Every pair of positions p < q with q - p <= window (and, when ``doc`` marks
    documents, lying in the same document) adds 1/(q - p) to the canonical
    entry (min id, max id). Returns (rows, cols, vals) sorted by (row, col).
    """
    ids = np.asarray(ids, dtype=np.int64)
    keys = []
    weights = []
    for k in range(1, window + 1):
        if k >= ids.shape[0]:
            break
        a = ids[:-k]
        b = ids[k:]
        same = doc[:-k] == doc[k:]
        a = a[same]
        b = b[same]
        keys.append(np.minimum(a, b) * vocab_size + np.maximum(a, b))
        weights.append(np.full(a.shape[0], 1.0 / k))
    if not keys:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0)
    keys = np.concatenate(keys)
    weights = np.concatenate(weights)
    uniq, inverse = np.unique(keys, return_inverse=True)
    vals = np.bincount(inverse, weights=weights, minlength=uniq.shape[0])
    return uniq // vocab_size, uniq % vocab_size, vals
