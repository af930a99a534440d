"""Sequential LSTM over the columns of P with a softmax head on the last state."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError, ShapeError
from .numkernel import SeededRng, dropout_mask, sigmoid, softmax

GATES = ("w", "f", "o", "u")  # write, forget, output, update


@dataclass
class LstmParams:
    W: np.ndarray   # 4 x r x d_in
    Ur: np.ndarray  # 4 x r x r
    B: np.ndarray   # 4 x r
    Ws: np.ndarray  # z x r
    bs: np.ndarray  # z

    def __post_init__(self):
        _, r, d = self.W.shape
        expect = {"W": (4, r, d), "Ur": (4, r, r), "B": (4, r), "Ws": (self.bs.shape[0], r)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def memory(self):
        return self.B.shape[1]

    @property
    def input_dim(self):
        return self.W.shape[2]

    @property
    def num_classes(self):
        return self.bs.shape[0]

    @classmethod
    def zeros(cls, d_in, r, z):
        return cls(np.zeros((4, r, d_in)), np.zeros((4, r, r)), np.zeros((4, r)),
                   np.zeros((z, r)), np.zeros(z))

    @classmethod
    def init(cls, d_in, r, z, rng: SeededRng):
        p = cls.zeros(d_in, r, z)
        bound = np.sqrt(6.0 / (r + d_in + r))
        p.W[:] = rng.uniform(-bound, bound, p.W.shape)
        p.Ur[:] = rng.uniform(-bound, bound, p.Ur.shape)
        b = np.sqrt(6.0 / (z + r))
        p.Ws[:] = rng.uniform(-b, b, p.Ws.shape)
        p.B[1] = 1.0
        return p

    def params(self, prefix="lstm.") -> dict[str, np.ndarray]:
        return {prefix + k: getattr(self, k) for k in ("W", "Ur", "B", "Ws", "bs")}


def lstm_step(p: LstmParams, x, h_prev, c_prev):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.input_dim,) or np.shape(h_prev) != (p.memory,) or np.shape(c_prev) != (p.memory,):
        raise ShapeError(f"lstm_step shapes x={x.shape} h={np.shape(h_prev)} c={np.shape(c_prev)}")
    pre = [p.W[g] @ x + p.Ur[g] @ h_prev + p.B[g] for g in range(4)]
    w, f, o = sigmoid(pre[0]), sigmoid(pre[1]), sigmoid(pre[2])
    u = np.tanh(pre[3])
    c = w * u + f * c_prev
    h = o * np.tanh(c)
    return h, c, {"w": w, "f": f, "o": o, "u": u}


@dataclass
class SeqForward:
    Pt: np.ndarray
    label: int
    out_mask: np.ndarray
    Hs: np.ndarray  # (n + 1) x r, row 0 is the zero initial state
    Cs: np.ndarray
    G: np.ndarray
    probs: np.ndarray
    loss: float

    @property
    def steps(self):
        return self.G.shape[0]


def seq_forward(p: LstmParams, P, label=-1, train=False, rng: SeededRng | None = None,
                output_dropout=0.5) -> SeqForward:
    """Run the LSTM over P's columns; the loss is -log p(label) (0 when label < 0)."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != p.input_dim:
        raise ShapeError(f"feature maps have shape {P.shape}, LSTM expects {p.input_dim} rows")
    if P.shape[1] < 1:
        raise ShapeError("empty sequence")
    if label >= p.num_classes:
        raise DataError(f"label {label} outside {p.num_classes} classes")
    if train and output_dropout > 0:
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        out_mask = dropout_mask(rng, p.memory, output_dropout)
    else:
        out_mask = np.ones(p.memory)
    Pt = np.ascontiguousarray(P.T)
    Hs, Cs, G, probs, loss = kernels.lstm_forward(Pt, p.W, p.Ur, p.B, out_mask, p.Ws, p.bs, int(label))
    return SeqForward(Pt, int(label), out_mask, Hs, Cs, G, probs, float(loss))


def seq_backward(p: LstmParams, fwd: SeqForward, grads: dict | None = None, prefix="lstm."):
    if grads is None:
        grads = {}
    for name, theta in p.params(prefix).items():
        if name not in grads:
            grads[name] = np.zeros_like(theta)
    g = lambda k: grads[prefix + k]  # noqa: E731
    dPt = np.zeros_like(fwd.Pt)
    kernels.lstm_backward(fwd.Pt, fwd.label, fwd.out_mask, p.W, p.Ur, p.Ws, fwd.Hs, fwd.Cs, fwd.G,
                          fwd.probs, dPt, g("W"), g("Ur"), g("B"), g("Ws"), g("bs"))
    return grads, dPt.T.copy()
