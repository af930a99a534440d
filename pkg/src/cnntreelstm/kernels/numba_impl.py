"""numba backend: the shared loops compiled in nopython mode, plus
compiled replacements for the RNG, convolution and co-occurrence kernels."""
import numba
import numpy as np
from numba import types
from numba.typed import Dict

from . import _loops, numpy_impl

_jit = numba.njit(cache=True, nogil=True)

tree_forward = _jit(_loops.tree_forward)
tree_backward = _jit(_loops.tree_backward)
lstm_forward = _jit(_loops.lstm_forward)
lstm_backward = _jit(_loops.lstm_backward)
glove_epoch = _jit(_loops.glove_epoch)
_conv_forward = _jit(_loops.conv_forward_loops)
_conv_backward = _jit(_loops.conv_backward_loops)

_U5 = np.uint64(5)
_U9 = np.uint64(9)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U64 = np.uint64(64)


@_jit
def _rotl(x, k):
    return (x << k) | (x >> (_U64 - k))


@_jit
def _xoshiro_fill(state, flat):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    scale = 2.0**-53
    for k in range(flat.shape[0]):
        result = _rotl(s1 * _U5, np.uint64(7)) * _U9
        t = s1 << _U17
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, np.uint64(45))
        flat[k] = np.float64(result >> _U11) * scale
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


def xoshiro_fill(state, out):
    _xoshiro_fill(state, out.reshape(-1))


def conv_forward_loops(X, W, b):
    return _conv_forward(np.ascontiguousarray(X), np.ascontiguousarray(W), b)


def conv_backward_loops(X, W, dZ):
    return _conv_backward(np.ascontiguousarray(X), np.ascontiguousarray(W), np.ascontiguousarray(dZ))


@_jit
def _cooccur(ids, doc, window, vocab_size):
    table = Dict.empty(key_type=types.int64, value_type=types.float64)
    n = ids.shape[0]
    for p in range(n):
        stop = min(n, p + window + 1)
        for q in range(p + 1, stop):
            if doc[p] != doc[q]:
                continue
            a = ids[p]
            b = ids[q]
            if a > b:
                a, b = b, a
            key = a * vocab_size + b
            w = 1.0 / (q - p)
            if key in table:
                table[key] += w
            else:
                table[key] = w
    keys = np.empty(len(table), dtype=np.int64)
    vals = np.empty(len(table))
    i = 0
    for key, val in table.items():
        keys[i] = key
        vals[i] = val
        i += 1
    perm = np.argsort(keys)
    keys = keys[perm]
    return keys // vocab_size, keys % vocab_size, vals[perm]


def cooccur_pairs(ids, doc, window, vocab_size):
    return _cooccur(np.asarray(ids, dtype=np.int64), np.asarray(doc, dtype=np.int64),
                    np.int64(window), np.int64(vocab_size))


# The convolution is a dense matrix product; numpy's BLAS-backed im2col beats
# the compiled loops (see benchmarks/bench_kernels.py), so both backends share it.
conv_forward = numpy_impl.conv_forward
conv_backward = numpy_impl.conv_backward
