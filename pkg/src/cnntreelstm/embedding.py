"""Word-vector channels and the concatenated multi-channel lookup."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import EmbeddingLoadError, ShapeError
from .numkernel import MASK64, SeededRng, fnv1a64, splitmix64
from .optim import AdaGradState, adagrad_step

OOV_RANGE = 0.05


class Vocabulary:
    def __init__(self, words: Iterable[str] = ()):
        self.index: dict[str, int] = {}
        self.words: list[str] = []
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        idx = self.index.get(word)
        if idx is None:
            idx = self.index[word] = len(self.words)
            self.words.append(word)
        return idx

    def __contains__(self, word):
        return word in self.index

    def __len__(self):
        return len(self.words)


def oov_vector(token: str, dim: int, seed: int) -> np.ndarray:
    """Initial vector for an unseen token: uniform in [-0.05, 0.05]^dim,
    seeded by (run seed, token) so it does not depend on lookup order."""
    _, mixed = splitmix64((int(seed) ^ fnv1a64(token.encode("utf-8"))) & MASK64)
    return SeededRng(mixed).uniform(-OOV_RANGE, OOV_RANGE, dim)


class EmbeddingChannel:
    """One word-vector table. Rows are appended when OOV tokens are looked up."""

    def __init__(self, vocab: Vocabulary, table, trainable=True, learning_rate=0.1,
                 seed=0, name="emb0"):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != len(vocab):
            raise ShapeError(f"table shape {table.shape} does not match vocabulary of {len(vocab)}")
        self.vocab = vocab
        self.dim = table.shape[1]
        self._buf = np.array(table)
        self._rows = table.shape[0]
        self.trainable = trainable
        self.learning_rate = learning_rate
        self.seed = seed
        self.name = name
        self.frozen_updates = 0

    @property
    def table(self) -> np.ndarray:
        return self._buf[: self._rows]

    def __len__(self):
        return self._rows

    def _append(self, vec):
        if self._rows == self._buf.shape[0]:
            grown = np.zeros((max(8, 2 * self._buf.shape[0]), self.dim))
            grown[: self._rows] = self._buf[: self._rows]
            self._buf = grown
        self._buf[self._rows] = vec
        self._rows += 1

    def lookup(self, token: str) -> int:
        """Exact match, then lowercase match, else allocate a seeded OOV row."""
        idx = self.vocab.index.get(token)
        if idx is not None:
            return idx
        idx = self.vocab.index.get(token.lower())
        if idx is not None:
            return idx
        self._append(oov_vector(token, self.dim, self.seed))
        return self.vocab.add(token)


def lookup(ch: EmbeddingChannel, token: str) -> int:
    return ch.lookup(token)


def _parse_vector(fields, lineno):
    try:
        vec = [float(x) for x in fields]
    except ValueError as exc:
        raise EmbeddingLoadError(f"non-numeric field ({exc})", lineno) from None
    if not all(math.isfinite(x) for x in vec):
        raise EmbeddingLoadError("non-finite value", lineno)
    return vec


def load_glove_text(path, trainable=True, learning_rate=0.1, seed=0, name=None,
                    keep: Optional[set] = None) -> EmbeddingChannel:
    """Read ``word v1 ... vd`` lines. ``keep`` restricts which words are stored;
    every line is still checked for dimension and duplicates."""
    path = Path(path)
    words: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.rstrip(" ").split(" ")
            word, values = fields[0], fields[1:]
            if not word:
                raise EmbeddingLoadError("empty word", lineno)
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise EmbeddingLoadError("no vector components", lineno)
            elif len(values) != dim:
                raise EmbeddingLoadError(f"expected {dim} components, found {len(values)}", lineno)
            if word in seen:
                raise EmbeddingLoadError(f"duplicate word {word!r}", lineno)
            seen.add(word)
            if keep is not None and word not in keep:
                continue
            rows.append(_parse_vector(values, lineno))
            words.append(word)
    if dim is None:
        raise EmbeddingLoadError("empty embedding file", 0)
    table = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingChannel(Vocabulary(words), table, trainable=trainable,
                            learning_rate=learning_rate, seed=seed, name=name or path.stem)


def save_glove_text(ch: EmbeddingChannel, path):
    with open(path, "w", encoding="utf-8") as fh:
        for word, row in zip(ch.vocab.words, ch.table):
            fh.write(word + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


class MultiChannelEmbedder:
    """Ordered channels; a word's input vector is the channel vectors stacked
    channel-major, so the total dimension is the sum of channel dimensions."""

    def __init__(self, channels: list[EmbeddingChannel]):
        if not channels:
            raise ShapeError("at least one embedding channel is required")
        self.channels = list(channels)

    @property
    def dim(self) -> int:
        return sum(ch.dim for ch in self.channels)

    def lookup_indices(self, tokens) -> list[np.ndarray]:
        return [np.array([ch.lookup(t) for t in tokens], dtype=np.int64) for ch in self.channels]

    def embed_indices(self, indices) -> np.ndarray:
        return np.concatenate([ch.table[idx].T for ch, idx in zip(self.channels, indices)], axis=0)

    def embed_sentence(self, tokens) -> np.ndarray:
        if len(tokens) == 0:
            raise ShapeError("cannot embed an empty sentence")
        return self.embed_indices(self.lookup_indices(tokens))

    def split_columns(self, dX):
        """Split a d x n gradient into per-channel (n x d_e) row gradients."""
        out = []
        start = 0
        for ch in self.channels:
            out.append(dX[start:start + ch.dim].T)
            start += ch.dim
        return out


def embed_sentence(emb: MultiChannelEmbedder, tokens) -> np.ndarray:
    return emb.embed_sentence(tokens)


def apply_embedding_gradient(ch: EmbeddingChannel, indices, row_grads, state: AdaGradState,
                             lr: Optional[float] = None):
    """AdaGrad update of the looked-up rows only.

    ``row_grads[k]`` is the gradient for row ``indices[k]``; repeated indices
    are summed before the step. Frozen channels are left untouched and the
    attempt is counted in ``ch.frozen_updates``.
    """
    if not ch.trainable:
        ch.frozen_updates += 1
        return
    indices = np.asarray(indices, dtype=np.int64)
    row_grads = np.asarray(row_grads, dtype=np.float64).reshape(len(indices), ch.dim)
    uniq, inverse = np.unique(indices, return_inverse=True)
    summed = np.zeros((uniq.shape[0], ch.dim))
    np.add.at(summed, inverse, row_grads)
    acc = state.accumulator(f"embedding.{ch.name}", ch.table.shape)
    rows_theta = ch.table[uniq]
    rows_acc = acc[uniq]
    adagrad_step(rows_theta, summed, rows_acc, ch.learning_rate if lr is None else lr,
                 state.eps, f"embedding.{ch.name}")
    ch.table[uniq] = rows_theta
    acc[uniq] = rows_acc
