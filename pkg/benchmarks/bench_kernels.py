"""Time the numba and pure-numpy kernel backends on full-size model shapes.

    python benchmarks/bench_kernels.py [--repeat 5] [--words 20]

Both backends are imported in-process; numba functions are warmed up
(compiled) before timing. ``conv_fwd_loops`` times the direct loop form of
the convolution, which is why the numba backend routes ``conv_*`` to the
numpy im2col path instead. The numba co-occurrence kernel trades speed for
memory that grows with distinct pairs rather than tokens x window.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cnntreelstm import kernels
from cnntreelstm.kernels import numpy_impl
from cnntreelstm.numkernel import SeededRng
from cnntreelstm.toy import random_tree
from cnntreelstm.treebank import postorder_arrays
from cnntreelstm.treelstm import TreeLstmParams


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n_words, d=300, m=100, r=150, z=5):
    rng = SeededRng(0)
    X = rng.uniform(-1, 1, (d, n_words))
    W = rng.uniform(-0.1, 0.1, (m, d, 3))
    b = np.zeros(m)
    dZ = rng.uniform(-1, 1, (m, n_words))
    arr = postorder_arrays(random_tree(rng, [f"w{i}" for i in range(n_words)], z))
    p = TreeLstmParams.init(2 * m, r, z, rng)
    Pt = rng.uniform(0, 1, (n_words, 2 * m))
    mask = np.ones((arr.n_nodes, r))
    targs = (Pt, arr.left, arr.right, arr.leaf_col, arr.labels, mask, p.Wo, p.Wc, p.ao, p.ac, p.U, p.B, p.Ws, p.bs)
    lp = rng.uniform(-0.1, 0.1, (4, r, 2 * m)), rng.uniform(-0.1, 0.1, (4, r, r)), np.zeros((4, r))
    largs = (Pt, *lp, np.ones(r), p.Ws, p.bs, 1)
    V, gd, npairs = 2000, 50, 20000
    rows = (rng.random(npairs) * V).astype(np.int64)
    cols = (rng.random(npairs) * V).astype(np.int64)
    vals = 1.0 + rng.random(npairs) * 10
    order = rng.permutation(npairs)

    def glove(impl):
        g = SeededRng(1)
        state = [g.uniform(-0.01, 0.01, (V, gd)), g.uniform(-0.01, 0.01, (V, gd)), np.zeros(V), np.zeros(V),
                 np.ones((V, gd)), np.ones((V, gd)), np.ones(V), np.ones(V)]
        return impl.glove_epoch(*state, rows, cols, vals, order, 100.0, 0.75, 0.05)

    ids = (rng.random(20000) * 5000).astype(np.int64)
    doc = np.zeros_like(ids)

    def make(impl):
        return {
            "conv_forward": lambda: impl.conv_forward(X, W, b),
            "conv_backward": lambda: impl.conv_backward(X, W, dZ),
            "conv_fwd_loops": lambda: impl.conv_forward_loops(X, W, b),
            "tree_forward": lambda: impl.tree_forward(*targs),
            "lstm_forward": lambda: impl.lstm_forward(*largs),
            "glove_epoch": lambda: glove(impl),
            "cooccur_pairs": lambda: impl.cooccur_pairs(ids, doc, 10, 5000),
        }
    return make


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--words", type=int, default=20)
    args = ap.parse_args(argv)

    make = cases(args.words)
    impls = {"numpy": numpy_impl}
    if kernels.numba_impl is not None:
        impls["numba"] = kernels.numba_impl
    else:
        print("numba backend unavailable; timing numpy only")
    results = {}
    for name, impl in impls.items():
        fns = make(impl)
        for fn in fns.values():
            fn()  # warm-up / compile
        results[name] = {k: best_of(fn, args.repeat) for k, fn in fns.items()}
    print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n in impls) + ("     speedup" if len(impls) > 1 else ""))
    for k in results["numpy"]:
        row = f"{k:<16}" + "".join(f"{results[n][k] * 1e3:>10.3f}ms" for n in impls)
        if "numba" in results:
            row += f"{results['numpy'][k] / results['numba'][k]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
