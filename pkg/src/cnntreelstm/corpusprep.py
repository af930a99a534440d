"""Review-corpus preparation and desk-scale GloVe training.

Pipeline: JSON-lines reviews -> group by product id -> sort each group by
rating -> one review per line -> tokens -> distance-weighted co-occurrence
counts -> weighted least-squares word vectors.
"""
from __future__ import annotations

import json
import logging
import math
import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .embedding import EmbeddingChannel, Vocabulary
from .errors import ConfigError, DataError, NumericError
from .numkernel import SeededRng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReviewRecord:
    asin: str
    overall: float
    review_text: str


def _parse_review(line: str) -> Optional[ReviewRecord]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict):
        return None
    asin, overall, text = obj.get("asin"), obj.get("overall"), obj.get("reviewText")
    if not isinstance(asin, str) or not asin or not isinstance(text, str):
        return None
    if isinstance(overall, bool) or not isinstance(overall, (int, float)):
        return None
    if not 1 <= overall <= 5:
        return None
    return ReviewRecord(asin, float(overall), text)


def ingest_reviews(lines: Iterable[str], stats: Optional[Counter] = None) -> list[ReviewRecord]:
    """Parse one JSON object per line; malformed lines are skipped and counted
    under ``stats["skipped"]``."""
    stats = stats if stats is not None else Counter()
    records = []
    for line in lines:
        if not line.strip():
            continue
        rec = _parse_review(line)
        if rec is None:
            stats["skipped"] += 1
        else:
            records.append(rec)
    stats["records"] += len(records)
    if stats["skipped"]:
        log.warning("skipped %d malformed review lines", stats["skipped"])
    return records


def group_sort(records: Iterable[ReviewRecord]) -> list[ReviewRecord]:
    """Groups in first-seen product order; stable ascending rating sort inside each group."""
    groups: dict[str, list[ReviewRecord]] = {}
    for rec in records:
        groups.setdefault(rec.asin, []).append(rec)
    out = []
    for group in groups.values():
        out.extend(sorted(group, key=lambda r: r.overall))
    return out


def group_sort_dump(records: Iterable[ReviewRecord]) -> str:
    """Review texts, one per line, in :func:`group_sort` order."""
    return "".join(" ".join(rec.review_text.split()) + "\n" for rec in group_sort(records))


_PUNCT = frozenset(string.punctuation)
_BRACKETS = {"(": "-LRB-", ")": "-RRB-"}
_SPECIAL = {"-lrb-": "-LRB-", "-rrb-": "-RRB-"}
_CLITICS = ("'s", "'re", "'ve", "'ll", "'d", "'m")


def _punct_token(ch):
    return _BRACKETS.get(ch, ch)


def _split_word(word: str) -> list[str]:
    if word in _SPECIAL:
        return [_SPECIAL[word]]
    if word == "n't" or word in _CLITICS:
        return [word]
    lead = []
    while word and word[0] in _PUNCT and word not in _CLITICS and word not in _SPECIAL:
        lead.append(_punct_token(word[0]))
        word = word[1:]
    trail = []
    while word and word[-1] in _PUNCT and word not in _SPECIAL:
        trail.append(_punct_token(word[-1]))
        word = word[:-1]
    trail.reverse()
    core = []
    if word:
        if word.endswith("n't") and len(word) > 3:
            core = _split_word(word[:-3]) + ["n't"]
        else:
            for clitic in _CLITICS:
                if word.endswith(clitic) and len(word) > len(clitic):
                    core = _split_word(word[: -len(clitic)]) + [clitic]
                    break
            else:
                core = _split_word(word) if word in _SPECIAL else [word]
    return lead + core + trail


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, peel leading/trailing punctuation,
    map parentheses to -LRB-/-RRB- and split clitics (``don't`` -> ``do n't``)."""
    tokens = []
    for chunk in text.split():
        tokens.extend(_split_word(chunk.lower()))
    return tokens


# --------------------------------------------------------------------------
# co-occurrence


@dataclass(frozen=True)
class GloveTrainConfig:
    x_max: float = 100.0
    alpha: float = 0.75
    dim: int = 300
    window: int = 20
    min_count: int = 5
    iterations: int = 25
    learning_rate: float = 0.05
    seed: int = 0
    reset_at_boundaries: bool = False

    def __post_init__(self):
        if self.x_max <= 0:
            raise ConfigError("x_max must be positive")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must be in (0, 1]")
        if self.dim < 1 or self.window < 1 or self.min_count < 1 or self.iterations < 0:
            raise ConfigError("dim, window and min_count must be >= 1, iterations >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class CooccurrenceTable:
    """Canonical (row <= col) entries; reads are symmetric."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    vocab_size: int

    def __post_init__(self):
        self._index = {(int(i), int(j)): k for k, (i, j) in enumerate(zip(self.rows, self.cols))}

    def __len__(self):
        return self.vals.shape[0]

    def get(self, a: int, b: int) -> float:
        k = self._index.get((min(a, b), max(a, b)))
        return 0.0 if k is None else float(self.vals[k])

    def directed(self):
        """Entries in both directions (diagonal once), as used for training."""
        off = self.rows != self.cols
        rows = np.concatenate([self.rows, self.cols[off]])
        cols = np.concatenate([self.cols, self.rows[off]])
        vals = np.concatenate([self.vals, self.vals[off]])
        return rows, cols, vals


def build_vocabulary(documents: Iterable[Iterable[str]], min_count: int) -> Vocabulary:
    """Words seen at least ``min_count`` times, most frequent first (ties by word)."""
    counts = Counter()
    for doc in documents:
        counts.update(doc)
    kept = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    return Vocabulary(kept)


def build_cooccurrence(documents, window: int = 20, min_count: int = 5,
                       reset_at_boundaries: bool = False):
    """Returns (CooccurrenceTable, Vocabulary).

    Out-of-vocabulary tokens are dropped before windowing. Without boundary
    reset, windows run across document ends.
    """
    documents = [list(doc) for doc in documents]
    if not any(documents):
        raise DataError("empty corpus")
    vocab = build_vocabulary(documents, min_count)
    if len(vocab) == 0:
        raise DataError(f"no word occurs at least {min_count} times")
    ids, doc_ids = [], []
    for d, doc in enumerate(documents):
        for tok in doc:
            idx = vocab.index.get(tok)
            if idx is not None:
                ids.append(idx)
                doc_ids.append(d if reset_at_boundaries else 0)
    rows, cols, vals = kernels.cooccur_pairs(np.asarray(ids, dtype=np.int64),
                                            np.asarray(doc_ids, dtype=np.int64), window, len(vocab))
    return CooccurrenceTable(rows, cols, vals, len(vocab)), vocab


# --------------------------------------------------------------------------
# GloVe


def glove_weight(x, x_max=100.0, alpha=0.75):
    """min(1, (x / x_max) ** alpha)."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x < x_max, (x / x_max) ** alpha, 1.0)


def glove_objective(W, Wc, b, bc, rows, cols, vals, x_max, alpha) -> float:
    diff = np.einsum("ij,ij->i", W[rows], Wc[cols]) + b[rows] + bc[cols] - np.log(vals)
    return float(np.sum(glove_weight(vals, x_max, alpha) * diff * diff))


@dataclass
class GloveModel:
    W: np.ndarray
    Wc: np.ndarray
    b: np.ndarray
    bc: np.ndarray
    history: list

    def vectors(self):
        """Word plus context vectors."""
        return self.W + self.Wc


def glove_train(table: CooccurrenceTable, config: GloveTrainConfig = GloveTrainConfig(),
                rng: Optional[SeededRng] = None) -> GloveModel:
    """AdaGrad on the weighted least-squares objective. ``history[k]`` is the
    full objective after k passes (history[0] at initialisation)."""
    if len(table) == 0:
        raise DataError("empty co-occurrence table")
    rng = rng or SeededRng(config.seed)
    V, dim = table.vocab_size, config.dim
    W = (rng.random((V, dim)) - 0.5) / dim
    Wc = (rng.random((V, dim)) - 0.5) / dim
    b = (rng.random(V) - 0.5) / dim
    bc = (rng.random(V) - 0.5) / dim
    gW, gWc, gb, gbc = np.ones((V, dim)), np.ones((V, dim)), np.ones(V), np.ones(V)
    rows, cols, vals = table.directed()
    history = [glove_objective(W, Wc, b, bc, rows, cols, vals, config.x_max, config.alpha)]
    for it in range(config.iterations):
        order = rng.permutation(vals.shape[0])
        kernels.glove_epoch(W, Wc, b, bc, gW, gWc, gb, gbc, rows, cols, vals, order,
                            float(config.x_max), float(config.alpha), float(config.learning_rate))
        J = glove_objective(W, Wc, b, bc, rows, cols, vals, config.x_max, config.alpha)
        if not math.isfinite(J):
            raise NumericError(f"GloVe objective diverged at iteration {it + 1}")
        history.append(J)
        log.info("glove iteration %d objective %.6f", it + 1, J)
    return GloveModel(W, Wc, b, bc, history)


def glove_channel(model: GloveModel, vocab: Vocabulary, name="glove") -> EmbeddingChannel:
    return EmbeddingChannel(Vocabulary(vocab.words), model.vectors(), name=name)
