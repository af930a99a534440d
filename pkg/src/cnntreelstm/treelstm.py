"""Constituency Tree-LSTM: leaf, composer and output modules over a binary tree.

Leaf i reads column i of the feature-map matrix P. The training loss is the
sum of the negative log-likelihood over every labelled node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError, ShapeError
from .numkernel import SeededRng, dropout_mask, sigmoid, softmax
from .treebank import SentimentTree, TreeArrays, postorder_arrays

GATES = ("i", "l", "r", "o", "u")  # composer gate order in U
SIDES = ("l", "r")
BIASES = ("i", "f", "o", "u")


def _glorot(rng, rows, cols, size=None):
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size if size is not None else (rows, cols))


@dataclass
class TreeLstmParams:
    Wo: np.ndarray  # r x d_in
    Wc: np.ndarray  # r x d_in
    ao: np.ndarray  # r
    ac: np.ndarray  # r
    U: np.ndarray   # 5 x 2 x r x r, see GATES / SIDES
    B: np.ndarray   # 4 x r, rows b_i, b_f, b_o, b_u
    Ws: np.ndarray  # z x r
    bs: np.ndarray  # z

    def __post_init__(self):
        r, d = self.Wo.shape
        expect = {
            "Wc": (r, d), "ao": (r,), "ac": (r,), "U": (5, 2, r, r), "B": (4, r),
            "Ws": (self.bs.shape[0], r),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def memory(self) -> int:
        return self.ao.shape[0]

    @property
    def input_dim(self) -> int:
        return self.Wo.shape[1]

    @property
    def num_classes(self) -> int:
        return self.bs.shape[0]

    @classmethod
    def zeros(cls, d_in, r, z):
        return cls(np.zeros((r, d_in)), np.zeros((r, d_in)), np.zeros(r), np.zeros(r),
                   np.zeros((5, 2, r, r)), np.zeros((4, r)), np.zeros((z, r)), np.zeros(z))

    @classmethod
    def init(cls, d_in, r, z, rng: SeededRng):
        p = cls.zeros(d_in, r, z)
        p.Wo[:] = _glorot(rng, r, d_in)
        p.Wc[:] = _glorot(rng, r, d_in)
        p.U[:] = _glorot(rng, r, 2 * r, p.U.shape)
        p.Ws[:] = _glorot(rng, z, r)
        p.B[1] = 1.0
        return p

    def params(self, prefix="tree.") -> dict[str, np.ndarray]:
        return {prefix + k: getattr(self, k) for k in ("Wo", "Wc", "ao", "ac", "U", "B", "Ws", "bs")}


def leaf_forward(p: TreeLstmParams, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.input_dim,):
        raise ShapeError(f"leaf input has length {x.shape}, expected {p.input_dim}")
    o = sigmoid(p.Wo @ x + p.ao)
    c = p.Wc @ x + p.ac
    h = o * np.tanh(c)
    return c, h, {"x": x, "o": o}


def compose_forward(p: TreeLstmParams, h_l, c_l, h_r, c_r):
    r = p.memory
    for v in (h_l, c_l, h_r, c_r):
        if np.shape(v) != (r,):
            raise ShapeError(f"composer input has shape {np.shape(v)}, expected ({r},)")
    U, B = p.U, p.B
    i = sigmoid(U[0, 0] @ h_l + U[0, 1] @ h_r + B[0])
    f_l = sigmoid(U[1, 0] @ h_l + U[1, 1] @ h_r + B[1])
    f_r = sigmoid(U[2, 0] @ h_l + U[2, 1] @ h_r + B[1])
    o = sigmoid(U[3, 0] @ h_l + U[3, 1] @ h_r + B[2])
    u = np.tanh(U[4, 0] @ h_l + U[4, 1] @ h_r + B[3])
    c = i * u + f_l * c_l + f_r * c_r
    h = o * np.tanh(c)
    return c, h, {"i": i, "f_l": f_l, "f_r": f_r, "o": o, "u": u}


def node_predict(p: TreeLstmParams, h):
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (p.memory,):
        raise ShapeError(f"hidden state has shape {h.shape}, expected ({p.memory},)")
    return softmax(p.Ws @ h + p.bs)


@dataclass
class TreeForward:
    arrays: TreeArrays
    Pt: np.ndarray
    out_mask: np.ndarray
    C: np.ndarray
    H: np.ndarray
    G: np.ndarray
    probs: np.ndarray
    loss: float

    @property
    def root_probs(self):
        return self.probs[-1]

    def predictions(self):
        return self.probs.argmax(axis=1)


def tree_forward(p: TreeLstmParams, tree, P, train=False, rng: SeededRng | None = None,
                 output_dropout=0.5) -> TreeForward:
    """Annotate every node with (c, h, class probabilities) and sum the loss.

    ``tree`` may be a SentimentTree or its precomputed TreeArrays.
    """
    arrays = postorder_arrays(tree) if isinstance(tree, SentimentTree) else tree
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != p.input_dim:
        raise ShapeError(f"feature maps have shape {P.shape}, leaf module expects {p.input_dim} rows")
    if arrays.n_leaves != P.shape[1]:
        where = " ".join(tree.leaves()) if isinstance(tree, SentimentTree) else f"{arrays.n_leaves}-leaf tree"
        raise DataError(f"tree has {arrays.n_leaves} leaves but P has {P.shape[1]} columns: {where!r}")
    if arrays.labels.max() >= p.num_classes:
        raise DataError(f"label {arrays.labels.max()} outside {p.num_classes} classes")
    r = p.memory
    if train and output_dropout > 0:
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        out_mask = dropout_mask(rng, arrays.n_nodes * r, output_dropout).reshape(arrays.n_nodes, r)
    else:
        out_mask = np.ones((arrays.n_nodes, r))
    Pt = np.ascontiguousarray(P.T)
    C, H, G, probs, loss = kernels.tree_forward(
        Pt, arrays.left, arrays.right, arrays.leaf_col, arrays.labels, out_mask,
        p.Wo, p.Wc, p.ao, p.ac, p.U, p.B, p.Ws, p.bs)
    return TreeForward(arrays, Pt, out_mask, C, H, G, probs, float(loss))


def tree_backward(p: TreeLstmParams, fwd: TreeForward, grads: dict | None = None, prefix="tree."):
    """Gradients of the node-summed loss. Returns (grads, dP).

    If ``grads`` is given, parameter gradients are accumulated into it.
    """
    if fwd is None or fwd.H is None:
        raise ValueError("tree_backward needs a forward cache")
    if grads is None:
        grads = {}
    for name, theta in p.params(prefix).items():
        if name not in grads:
            grads[name] = np.zeros_like(theta)
    g = lambda k: grads[prefix + k]  # noqa: E731
    a = fwd.arrays
    dPt = np.zeros_like(fwd.Pt)
    kernels.tree_backward(
        fwd.Pt, a.left, a.right, a.leaf_col, a.labels, fwd.out_mask, p.Wo, p.Wc, p.U, p.Ws,
        fwd.C, fwd.H, fwd.G, fwd.probs, dPt,
        g("Wo"), g("Wc"), g("ao"), g("ac"), g("U"), g("B"), g("Ws"), g("bs"))
    return grads, dPt.T.copy()
