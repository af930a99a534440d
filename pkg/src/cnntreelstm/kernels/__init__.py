"""Hot inner loops, compiled with numba when available.

Set ``CNNTREELSTM_NUMBA=0`` before import to force the pure-numpy
fallbacks. Both backends are importable side by side through
:mod:`cnntreelstm.kernels.numpy_impl` and :mod:`cnntreelstm.kernels.numba_impl`
so tests and benchmarks can compare them directly.
"""
import importlib
import os

from . import numpy_impl


def _numba_requested():
    return os.environ.get("CNNTREELSTM_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def _load_numba():
    if not _numba_requested():
        return None
    try:
        return importlib.import_module(__name__ + ".numba_impl")
    except ImportError:  # numba not installed
        return None


numba_impl = _load_numba()

USE_NUMBA = numba_impl is not None
BACKEND = "numba" if USE_NUMBA else "numpy"

_impl = numba_impl if USE_NUMBA else numpy_impl

xoshiro_fill = _impl.xoshiro_fill
conv_forward = _impl.conv_forward
conv_backward = _impl.conv_backward
tree_forward = _impl.tree_forward
tree_backward = _impl.tree_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
cooccur_pairs = _impl.cooccur_pairs
glove_epoch = _impl.glove_epoch

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "numpy_impl",
    "numba_impl",
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
