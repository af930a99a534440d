"""Full classifiers: embeddings -> convolution -> Tree-LSTM or LSTM head."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .convolution import DEFAULT_FILTERS, ConvFilterBank, conv_backward, conv_forward
from .embedding import EmbeddingChannel, MultiChannelEmbedder, Vocabulary
from .errors import ConfigError
from .numkernel import SeededRng
from .seqlstm import LstmParams, seq_backward, seq_forward
from .treebank import SentimentTree, TreeArrays, postorder_arrays
from .treelstm import TreeLstmParams, tree_backward, tree_forward

TREE = "cnn-tree-lstm"
SEQ = "cnn-lstm"
MODEL_KINDS = (TREE, SEQ)


@dataclass(frozen=True)
class ModelSpec:
    kind: str = TREE
    num_classes: int = 5
    memory: int = 150
    filters: tuple = DEFAULT_FILTERS
    channel_dims: tuple = (300,)
    activation: str = "relu"
    conv_input_dropout: float = 0.5
    conv_output_dropout: float = 0.2
    output_dropout: float = 0.5

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        for rate in (self.conv_input_dropout, self.conv_output_dropout, self.output_dropout):
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"dropout rate {rate} outside [0, 1)")

    @property
    def input_dim(self):
        return sum(self.channel_dims)

    @property
    def n_filters(self):
        return sum(count for _, count in self.filters)


@dataclass
class Sample:
    """A prepared training/evaluation unit: a tree (tree model) or a token
    sequence with one label (sequence model)."""

    tokens: tuple
    indices: list
    arrays: Optional[TreeArrays] = None
    label: int = -1

    @property
    def gold(self) -> int:
        """Sentence-level gold label (root for trees)."""
        return int(self.arrays.labels[-1]) if self.arrays is not None else self.label


@dataclass
class EmbeddingGrads:
    """Row gradients collected per channel until the next optimiser step."""

    indices: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def add(self, idx, rows):
        self.indices.append(idx)
        self.rows.append(rows)

    def merged(self):
        if not self.indices:
            return np.zeros(0, dtype=np.int64), None
        return np.concatenate(self.indices), np.concatenate(self.rows, axis=0)


class SentimentModel:
    def __init__(self, spec: ModelSpec, embedder: MultiChannelEmbedder, conv: ConvFilterBank, head):
        self.spec = spec
        self.embedder = embedder
        self.conv = conv
        self.head = head
        # name of a tensor whose gradient is sign-flipped (gradient-check fault injection)
        self.fault: Optional[str] = None

    @classmethod
    def build(cls, spec: ModelSpec, embedder: MultiChannelEmbedder, seed: int = 0):
        if tuple(ch.dim for ch in embedder.channels) != tuple(spec.channel_dims):
            raise ConfigError(f"embedding dims {[ch.dim for ch in embedder.channels]} "
                              f"do not match spec {list(spec.channel_dims)}")
        rng = SeededRng(seed)
        conv = ConvFilterBank.init(spec.input_dim, spec.filters, rng.derive(1), activation=spec.activation,
                                   input_dropout=spec.conv_input_dropout,
                                   output_dropout=spec.conv_output_dropout)
        head_cls = TreeLstmParams if spec.kind == TREE else LstmParams
        head = head_cls.init(conv.n_filters, spec.memory, spec.num_classes, rng.derive(2))
        return cls(spec, embedder, conv, head)

    @property
    def is_tree(self):
        return self.spec.kind == TREE

    def params(self) -> dict[str, np.ndarray]:
        """Trainable tensors other than the embedding tables."""
        out = dict(self.conv.params())
        out.update(self.head.params())
        return out

    # -- sample preparation -------------------------------------------------

    def prepare_tree(self, tree: SentimentTree) -> Sample:
        tokens = tuple(tree.leaves())
        return Sample(tokens, self.embedder.lookup_indices(tokens), postorder_arrays(tree))

    def prepare_tokens(self, tokens, label=-1) -> Sample:
        tokens = tuple(tokens)
        return Sample(tokens, self.embedder.lookup_indices(tokens), None, int(label))

    def prepare_sentence(self, tree: SentimentTree) -> Sample:
        """Evaluation unit for either model kind: full tree, or root-labelled tokens."""
        if self.is_tree:
            return self.prepare_tree(tree)
        return self.prepare_tokens(tree.leaves(), -1 if tree.label is None else tree.label)

    # -- forward / backward -------------------------------------------------

    def forward(self, sample: Sample, train=False, rng: SeededRng | None = None):
        X = self.embedder.embed_indices(sample.indices)
        P, conv_cache = conv_forward(self.conv, X, train, rng)
        if self.is_tree:
            head = tree_forward(self.head, sample.arrays, P, train, rng, self.spec.output_dropout)
        else:
            head = seq_forward(self.head, P, sample.label, train, rng, self.spec.output_dropout)
        return conv_cache, head

    def loss(self, sample: Sample, train=False, rng=None) -> float:
        return self.forward(sample, train, rng)[1].loss

    def sentence_probs(self, sample: Sample) -> np.ndarray:
        head = self.forward(sample)[1]
        return head.root_probs if self.is_tree else head.probs

    def predict(self, sample: Sample) -> int:
        return int(np.argmax(self.sentence_probs(sample)))

    def accumulate(self, sample: Sample, grads: dict, emb_grads: list, train=False, rng=None) -> float:
        """Forward + backward for one sample; gradients are added into
        ``grads`` (name -> array) and ``emb_grads`` (one EmbeddingGrads per channel)."""
        conv_cache, head = self.forward(sample, train, rng)
        local = {}
        if self.is_tree:
            local, dP = tree_backward(self.head, head, local)
        else:
            local, dP = seq_backward(self.head, head, local)
        dX, conv_grads = conv_backward(self.conv, conv_cache, dP)
        local.update(conv_grads)
        if self.fault in local:
            local[self.fault] = -local[self.fault]
        for name, g in local.items():
            if name in grads:
                grads[name] += g
            else:
                grads[name] = g.copy()
        for ch_i, rows in enumerate(self.embedder.split_columns(dX)):
            if self.fault == f"embedding.{self.embedder.channels[ch_i].name}":
                rows = -rows
            emb_grads[ch_i].add(sample.indices[ch_i], rows)
        return head.loss

    def new_grads(self):
        return {name: np.zeros_like(theta) for name, theta in self.params().items()}, \
            [EmbeddingGrads() for _ in self.embedder.channels]

    # -- bookkeeping --------------------------------------------------------

    def param_shapes(self) -> list[tuple[str, tuple]]:
        return [(name, theta.shape) for name, theta in self.params().items()]

    def snapshot(self):
        return ({k: v.copy() for k, v in self.params().items()},
                [ch.table.copy() for ch in self.embedder.channels])

    def restore(self, snap):
        params, tables = snap
        for name, theta in self.params().items():
            theta[...] = params[name]
        for ch, table in zip(self.embedder.channels, tables):
            ch.table[: table.shape[0]] = table


def param_table(spec: ModelSpec) -> list[tuple[str, tuple, int]]:
    """(name, shape, count) for every trainable tensor, embeddings excluded."""
    embedder = MultiChannelEmbedder([EmbeddingChannel(Vocabulary(), np.zeros((0, d)), name=f"emb{k}")
                                     for k, d in enumerate(spec.channel_dims)])
    model = SentimentModel.build(spec, embedder)
    return [(name, theta.shape, int(theta.size)) for name, theta in model.params().items()]
