"""Direct re-implementation of the model loss, written from the layer
equations with no shared kernels, generic over the float dtype.

Used as the finite-difference side of the gradient check. Running it in
``np.longdouble`` keeps cancellation noise in (L(θ+ε) - L(θ-ε)) / 2ε well
below the relative-error tolerance even for gradient entries near 1e-8.
"""
from __future__ import annotations

import numpy as np

from .training import gradient_check
from .numkernel import SeededRng


def _sigmoid(x):
    return 1 / (1 + np.exp(-x))


def _nll(logits, label):
    m = logits.max()
    return np.log(np.sum(np.exp(logits - m))) + m - logits[label]


def _act(name, z):
    if name == "relu":
        return z if z > 0 else z * 0
    if name == "tanh":
        return np.tanh(z)
    return z


def reference_loss(spec, tensors, indices, tree_arrays, label, masks, dtype=np.longdouble):
    """Loss of one sample.

    ``tensors`` maps the model's parameter names plus ``embedding.<k>``
    (k = channel position) to arrays of ``dtype``. ``masks`` is
    (conv input mask, conv output mask, head output mask).
    """
    in_mask, conv_mask, head_mask = (np.asarray(m, dtype=dtype) for m in masks)
    # word vectors, channel-major
    cols = []
    for pos in range(len(indices[0])):
        cols.append(np.concatenate([tensors[f"embedding.{k}"][idx[pos]] for k, idx in enumerate(indices)]))
    X = np.stack(cols, axis=1) * in_mask
    d, n = X.shape
    # each filter response: sum of (W ⊙ window) + b over the zero-padded sentence
    rows = []
    for width, _ in sorted(spec.filters):
        W = tensors[f"conv.W{width}"]
        b = tensors[f"conv.b{width}"]
        half = width // 2
        Xp = np.concatenate([np.zeros((d, half), dtype=dtype), X, np.zeros((d, half), dtype=dtype)], axis=1)
        for v in range(W.shape[0]):
            rows.append([_act(spec.activation, np.sum(W[v] * Xp[:, j:j + width]) + b[v]) * conv_mask[j]
                         for j in range(n)])
    P = np.array(rows, dtype=dtype)

    if tree_arrays is None:
        return _lstm_loss(tensors, P, label, head_mask)
    return _tree_loss(tensors, P, tree_arrays, head_mask)


def _tree_loss(t, P, arrays, head_mask):
    Wo, Wc, ao, ac = t["tree.Wo"], t["tree.Wc"], t["tree.ao"], t["tree.ac"]
    U, B, Ws, bs = t["tree.U"], t["tree.B"], t["tree.Ws"], t["tree.bs"]
    total = [P.dtype.type(0)]

    def visit(k):
        if arrays.left[k] < 0:
            x = P[:, arrays.leaf_col[k]]
            o = _sigmoid(Wo @ x + ao)
            c = Wc @ x + ac
        else:
            c_l, h_l = visit(arrays.left[k])
            c_r, h_r = visit(arrays.right[k])
            i = _sigmoid(U[0, 0] @ h_l + U[0, 1] @ h_r + B[0])
            f_l = _sigmoid(U[1, 0] @ h_l + U[1, 1] @ h_r + B[1])
            f_r = _sigmoid(U[2, 0] @ h_l + U[2, 1] @ h_r + B[1])
            o = _sigmoid(U[3, 0] @ h_l + U[3, 1] @ h_r + B[2])
            u = np.tanh(U[4, 0] @ h_l + U[4, 1] @ h_r + B[3])
            c = i * u + f_l * c_l + f_r * c_r
        h = o * np.tanh(c)
        if arrays.labels[k] >= 0:
            total[0] += _nll(Ws @ (h * head_mask[k]) + bs, arrays.labels[k])
        return c, h

    visit(arrays.n_nodes - 1)
    return total[0]


def _lstm_loss(t, P, label, head_mask):
    W, Ur, B, Ws, bs = t["lstm.W"], t["lstm.Ur"], t["lstm.B"], t["lstm.Ws"], t["lstm.bs"]
    r = B.shape[1]
    h = np.zeros(r, dtype=P.dtype)
    c = np.zeros(r, dtype=P.dtype)
    for step in range(P.shape[1]):
        x = P[:, step]
        w = _sigmoid(W[0] @ x + Ur[0] @ h + B[0])
        f = _sigmoid(W[1] @ x + Ur[1] @ h + B[1])
        o = _sigmoid(W[2] @ x + Ur[2] @ h + B[2])
        u = np.tanh(W[3] @ x + Ur[3] @ h + B[3])
        c = w * u + f * c
        h = o * np.tanh(c)
    if label < 0:
        return P.dtype.type(0)
    return _nll(Ws @ (h * head_mask) + bs, label)


def oracle_gradient_check(model, sample, eps=1e-5, train=True, seed=0, dtype=np.longdouble):
    """Compare the model's analytic gradients with central differences of
    :func:`reference_loss` evaluated in ``dtype``.

    Returns (max relative error, {tensor name: max relative error}).
    """
    grads, emb_grads = model.new_grads()
    model.accumulate(sample, grads, emb_grads, train=train, rng=SeededRng(seed))
    conv_cache, head = model.forward(sample, train=train, rng=SeededRng(seed))
    masks = (conv_cache.in_mask, conv_cache.out_mask, head.out_mask)

    tensors = {name: np.array(theta, dtype=dtype) for name, theta in model.params().items()}
    names = {}
    for k, (ch, eg) in enumerate(zip(model.embedder.channels, emb_grads)):
        key = f"embedding.{k}"
        names[key] = f"embedding.{ch.name}"
        tensors[key] = np.array(ch.table, dtype=dtype)
        dense = np.zeros_like(ch.table)
        idx, rows = eg.merged()
        np.add.at(dense, idx, rows)
        grads[key] = dense

    def loss():
        return reference_loss(model.spec, tensors, sample.indices, sample.arrays, sample.label, masks, dtype)

    worst, per = gradient_check(loss, tensors, grads, eps)
    return worst, {names.get(k, k): v for k, v in per.items()}
