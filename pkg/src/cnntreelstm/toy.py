"""Small synthetic instances: random trees, tiny models for gradient checks,
and a ten-sentence toy treebank for overfitting runs."""
from __future__ import annotations

import numpy as np

from .embedding import EmbeddingChannel, MultiChannelEmbedder, Vocabulary
from .model import SEQ, TREE, ModelSpec, SentimentModel
from .numkernel import SeededRng
from .treebank import SentimentTree, parse_sexpr

GRADCHECK_WORDS = ("the", "movie", "was", "not", "good", "bad", "at", "all", "fun", "dull")


def random_tree(rng: SeededRng, tokens, n_classes=5, label_prob=1.0) -> SentimentTree:
    """Uniformly random binary bracketing of ``tokens`` with random labels.

    Nodes are unlabelled with probability ``1 - label_prob``.
    """
    def label():
        if rng.random() >= label_prob:
            return None
        return int(rng.random() * n_classes)

    def build(lo, hi):
        if hi - lo == 1:
            return SentimentTree(label(), token=tokens[lo])
        split = lo + 1 + int(rng.random() * (hi - lo - 1))
        return SentimentTree(label(), left=build(lo, split), right=build(split, hi))

    return build(0, len(tokens))


def random_channels(rng: SeededRng, dims, words=GRADCHECK_WORDS, scale=0.5):
    channels = []
    for k, d in enumerate(dims):
        table = rng.uniform(-scale, scale, (len(words), d))
        channels.append(EmbeddingChannel(Vocabulary(words), table, name=f"emb{k}", seed=k))
    return MultiChannelEmbedder(channels)


def gradcheck_instance(kind=TREE, seed=0, n_leaves=None, memory=4, n_classes=5,
                       channel_dims=(3, 2), filters=((3, 2), (5, 2)), param_scale=1.0):
    """A tiny random model and sample (at most 7 leaves, memory <= 4)."""
    rng = SeededRng(seed)
    if n_leaves is None:
        n_leaves = 2 + int(rng.random() * 6)
    tokens = [GRADCHECK_WORDS[int(rng.random() * len(GRADCHECK_WORDS))] for _ in range(n_leaves)]
    spec = ModelSpec(kind=kind, num_classes=n_classes, memory=memory, filters=tuple(filters),
                     channel_dims=tuple(channel_dims))
    model = SentimentModel.build(spec, random_channels(rng.derive(3), channel_dims), seed=seed)
    init = rng.derive(4)
    for theta in model.params().values():
        theta[...] = init.uniform(-param_scale, param_scale, theta.shape)
    if kind == TREE:
        sample = model.prepare_tree(random_tree(rng.derive(5), tokens, n_classes))
    else:
        sample = model.prepare_tokens(tokens, int(rng.random() * n_classes))
    return model, sample


# Ten sentences whose root sentiment is carried by distinct cue words.
TOY_TREEBANK = [
    "(4 (2 the) (4 (4 (2 very) (4 good)) (2 movie)))",
    "(0 (2 a) (0 (0 (2 truly) (0 awful)) (2 film)))",
    "(3 (2 (2 the) (2 plot)) (3 (2 is) (3 fine)))",
    "(1 (2 (2 the) (2 acting)) (1 (2 was) (1 weak)))",
    "(2 (2 it) (2 (2 is) (2 (2 a) (2 movie))))",
    "(4 (4 (2 simply) (4 brilliant)) (3 (2 and) (3 moving)))",
    "(0 (0 (2 utterly) (0 terrible)) (2 (2 in) (2 parts)))",
    "(3 (3 (2 quite) (3 enjoyable)) (2 overall))",
    "(1 (1 (2 rather) (1 dull)) (2 (2 at) (2 times)))",
    "(2 (2 (2 the) (2 film)) (2 (2 runs) (2 long)))",
]


def toy_treebank():
    return [parse_sexpr(line) for line in TOY_TREEBANK]


def toy_embedder(dims=(100,), seed=0, trees=None):
    trees = trees if trees is not None else toy_treebank()
    words = sorted({tok for t in trees for tok in t.leaves()})
    rng = SeededRng(seed).derive(7)
    channels = []
    for k, d in enumerate(dims):
        table = rng.uniform(-0.5, 0.5, (len(words), d))
        channels.append(EmbeddingChannel(Vocabulary(words), table, name=f"emb{k}", seed=seed + k))
    return MultiChannelEmbedder(channels)


def toy_model(kind=TREE, memory=16, filters=((3, 8), (5, 8)), dims=(100,), seed=0, setting_classes=5):
    spec = ModelSpec(kind=kind, num_classes=setting_classes, memory=memory, filters=tuple(filters),
                     channel_dims=tuple(dims))
    return SentimentModel.build(spec, toy_embedder(dims, seed), seed=seed)


__all__ = ["random_tree", "random_channels", "gradcheck_instance", "TOY_TREEBANK", "toy_treebank",
           "toy_embedder", "toy_model", "TREE", "SEQ"]
