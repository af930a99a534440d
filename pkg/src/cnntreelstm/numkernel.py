"""Dense primitives and the seeded random stream used across the package.

Matrices and vectors are plain float64 numpy arrays (2-D and 1-D).
"""
import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    """Return (next_state, output) of one splitmix64 step on a Python int."""
    x = (x + _GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


class SeededRng:
    """xoshiro256** stream seeded through splitmix64.

    The same seed yields the same stream on every platform and backend.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        state = np.zeros(4, dtype=np.uint64)
        x = self.seed
        for i in range(4):
            x, out = splitmix64(x)
            state[i] = out
        self._state = state

    def derive(self, tag: int) -> "SeededRng":
        """Independent stream keyed by ``tag``; does not advance this one."""
        _, mixed = splitmix64(self.seed ^ ((int(tag) * _GOLDEN) & MASK64))
        return SeededRng(mixed)

    def random(self, size=None):
        """Uniform doubles in [0, 1)."""
        if size is None:
            out = np.empty(1)
            kernels.xoshiro_fill(self._state, out)
            return float(out[0])
        out = np.empty(size)
        if out.size:
            kernels.xoshiro_fill(self._state, out)
        return out

    def uniform(self, low, high, size):
        return low + (high - low) * self.random(size)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        draws = self.random(n - 1)
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = int(draws[k] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def matvec(m, v):
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: matrix is {m.shape[0]}x{m.shape[1] if m.ndim == 2 else '?'}, "
                         f"vector has length {v.shape[0] if v.ndim == 1 else v.shape}")
    return m @ v


def hadamard_sum(a, b) -> float:
    """Sum of the elementwise product (one filter response before bias)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard_sum: shapes {a.shape} and {b.shape} differ")
    return float(np.sum(a * b))


def softmax(v):
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(v - v.max())
    return e / e.sum()


def sigmoid(v):
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh(v):
    return np.tanh(np.asarray(v, dtype=np.float64))


def relu(v):
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def dropout_mask(rng: SeededRng, length: int, rate: float, train: bool = True):
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1 - rate).

    In evaluation mode (``train=False``) the mask is all ones.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return np.ones(length)
    keep = rng.random(length) >= rate
    return keep / (1.0 - rate)
