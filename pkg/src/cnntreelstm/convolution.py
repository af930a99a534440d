"""Odd-width filter bank applied with half padding and unit stride.

Every filter produces one value per input column, so the stacked feature
maps P have exactly as many columns as the sentence has words.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError
from .numkernel import SeededRng, dropout_mask

DEFAULT_FILTERS = ((3, 100), (5, 100))

_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0.0).astype(np.float64)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
}


@dataclass
class ConvFilter:
    width: int
    W: np.ndarray  # d x width
    b: float

    def __post_init__(self):
        if self.width % 2 == 0 or self.width < 1:
            raise ConfigError(f"filter width must be odd, got {self.width}")
        if self.W.ndim != 2 or self.W.shape[1] != self.width:
            raise ShapeError(f"filter weights {self.W.shape} do not match width {self.width}")


@dataclass
class ConvFilterBank:
    """Filters grouped by width. ``weights[w]`` is (count, d, w), ``biases[w]`` is (count,)."""

    dim: int
    weights: dict[int, np.ndarray]
    biases: dict[int, np.ndarray]
    activation: str = "relu"
    input_dropout: float = 0.5
    output_dropout: float = 0.2
    widths: tuple = field(init=False)

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        for w, W in self.weights.items():
            if w % 2 == 0:
                raise ConfigError(f"filter width must be odd, got {w}")
            if W.ndim != 3 or W.shape[1] != self.dim or W.shape[2] != w:
                raise ShapeError(f"width-{w} filters have shape {W.shape}, expected (m, {self.dim}, {w})")
            if self.biases[w].shape != (W.shape[0],):
                raise ShapeError(f"width-{w} biases have shape {self.biases[w].shape}")
        self.widths = tuple(sorted(self.weights))

    @classmethod
    def init(cls, dim, filters=DEFAULT_FILTERS, rng: SeededRng | None = None, **kwargs):
        rng = rng or SeededRng(0)
        weights, biases = {}, {}
        for width, count in filters:
            if width % 2 == 0 or width < 1:
                raise ConfigError(f"filter width must be odd, got {width}")
            if width in weights:
                raise ConfigError(f"duplicate filter width {width}")
            bound = np.sqrt(6.0 / (dim * width + 1))
            weights[width] = rng.uniform(-bound, bound, (count, dim, width))
            biases[width] = np.zeros(count)
        return cls(dim, weights, biases, **kwargs)

    @property
    def n_filters(self) -> int:
        return sum(W.shape[0] for W in self.weights.values())

    def filter(self, v: int) -> ConvFilter:
        """The v-th filter (row v of P)."""
        for w in self.widths:
            count = self.weights[w].shape[0]
            if v < count:
                return ConvFilter(w, self.weights[w][v], float(self.biases[w][v]))
            v -= count
        raise IndexError("filter index out of range")

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for w in self.widths:
            out[f"conv.W{w}"] = self.weights[w]
            out[f"conv.b{w}"] = self.biases[w]
        return out


@dataclass
class ConvCache:
    X: np.ndarray
    in_mask: np.ndarray
    out_mask: np.ndarray
    Xd: np.ndarray
    Z: dict
    A: dict


def conv_forward(bank: ConvFilterBank, X, train=False, rng: SeededRng | None = None):
    """Feature maps P (m x n) for the d x n sentence matrix X.

    In training mode one input-dropout mask entry per word column is applied
    to X, and one output-dropout entry per column to P.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != bank.dim:
        raise ShapeError(f"input has {X.shape[0] if X.ndim == 2 else X.shape} rows, filters expect {bank.dim}")
    n = X.shape[1]
    if n < 1:
        raise ShapeError("empty sentence")
    if train and rng is None and (bank.input_dropout > 0 or bank.output_dropout > 0):
        raise ValueError("training-mode dropout needs an rng")
    in_mask = dropout_mask(rng, n, bank.input_dropout, train)
    out_mask = dropout_mask(rng, n, bank.output_dropout, train)
    Xd = X * in_mask[None, :]
    act, _ = _ACTIVATIONS[bank.activation]
    Z, A, rows = {}, {}, []
    for w in bank.widths:
        Z[w] = kernels.conv_forward(Xd, bank.weights[w], bank.biases[w])
        A[w] = act(Z[w])
        rows.append(A[w])
    P = np.concatenate(rows, axis=0) * out_mask[None, :]
    return P, ConvCache(X, in_mask, out_mask, Xd, Z, A)


def conv_backward(bank: ConvFilterBank, cache: ConvCache, dP):
    """Returns (dX, grads) where grads maps ``conv.W{w}``/``conv.b{w}`` to arrays."""
    dP = np.asarray(dP, dtype=np.float64)
    n = cache.X.shape[1]
    if dP.shape != (bank.n_filters, n):
        raise ShapeError(f"dP has shape {dP.shape}, forward produced {(bank.n_filters, n)}")
    _, dact = _ACTIVATIONS[bank.activation]
    dA = dP * cache.out_mask[None, :]
    dXd = np.zeros_like(cache.X)
    grads = {}
    start = 0
    for w in bank.widths:
        count = bank.weights[w].shape[0]
        dZ = dA[start:start + count] * dact(cache.Z[w], cache.A[w])
        start += count
        dXw, dW, db = kernels.conv_backward(cache.Xd, bank.weights[w], dZ)
        dXd += dXw
        grads[f"conv.W{w}"] = dW
        grads[f"conv.b{w}"] = db
    return dXd * cache.in_mask[None, :], grads
