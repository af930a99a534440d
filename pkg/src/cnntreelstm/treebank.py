"""Sentiment treebank ingestion (PTB-style s-expressions, one tree per line)."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigError, DataError, TreeParseError

FINE_GRAINED = "fine-grained"
BINARY = "binary"
SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class SentimentTree:
    """Binary constituency tree; leaves carry a token, internal nodes two children.

    ``label`` is None for nodes that are excluded from the loss.
    """

    label: Optional[int]
    token: Optional[str] = None
    left: Optional["SentimentTree"] = None
    right: Optional["SentimentTree"] = None

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def leaves(self) -> list[str]:
        return [node.token for node in self.preorder() if node.is_leaf]

    def preorder(self) -> Iterator["SentimentTree"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def __len__(self):
        return sum(1 for _ in self.preorder())


@dataclass(frozen=True)
class TaskSetting:
    mode: str = FINE_GRAINED

    def __post_init__(self):
        if self.mode not in (FINE_GRAINED, BINARY):
            raise ConfigError(f"unknown task setting {self.mode!r}")

    @property
    def num_classes(self) -> int:
        return 5 if self.mode == FINE_GRAINED else 2

    def apply(self, tree: SentimentTree) -> Optional[SentimentTree]:
        return tree if self.mode == FINE_GRAINED else to_binary(tree)


@dataclass
class DatasetSplit:
    name: str
    trees: list[SentimentTree]

    def __len__(self):
        return len(self.trees)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message, pos=None):
        pos = self.pos if pos is None else pos
        return TreeParseError(message, len(self.text[:pos].encode("utf-8")))

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def word(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and not self.text[self.pos].isspace() and self.text[self.pos] not in "()":
            self.pos += 1
        return self.text[start:self.pos]

    def node(self) -> SentimentTree:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != "(":
            raise self.error("expected '('")
        self.pos += 1
        label_pos = self.pos
        raw = self.word()
        if len(raw) != 1 or raw not in "01234":
            raise self.error(f"label {raw!r} outside 0-4", label_pos)
        label = int(raw)
        self.skip_ws()
        if self.pos >= len(self.text):
            raise self.error("unbalanced parentheses")
        children = []
        if self.text[self.pos] == "(":
            while True:
                self.skip_ws()
                if self.pos >= len(self.text):
                    raise self.error("unbalanced parentheses")
                if self.text[self.pos] != "(":
                    break
                children.append(self.node())
            if len(children) != 2:
                raise self.error(f"internal node with {len(children)} children", label_pos)
            if self.text[self.pos] != ")":
                raise self.error("token mixed with subtrees")
            self.pos += 1
            return SentimentTree(label, left=children[0], right=children[1])
        token_pos = self.pos
        token = self.word()
        if not token:
            raise self.error("empty token", token_pos)
        self.skip_ws()
        if self.pos >= len(self.text):
            raise self.error("unbalanced parentheses")
        if self.text[self.pos] != ")":
            raise self.error("expected ')' after token")
        self.pos += 1
        return SentimentTree(label, token=token)


def parse_sexpr(text: str) -> SentimentTree:
    """Parse one labelled s-expression such as ``(3 (2 a) (4 b))``."""
    parser = _Parser(text)
    tree = parser.node()
    parser.skip_ws()
    if parser.pos != len(text):
        raise parser.error("trailing characters after tree")
    return tree


def serialize_sexpr(tree: SentimentTree) -> str:
    if tree.label is None:
        raise DataError("cannot serialise an unlabelled node")
    if tree.is_leaf:
        return f"({tree.label} {tree.token})"
    return f"({tree.label} {serialize_sexpr(tree.left)} {serialize_sexpr(tree.right)})"


def load_trees(path, name: Optional[str] = None) -> DatasetSplit:
    path = Path(path)
    name = name or path.stem
    trees = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                trees.append(parse_sexpr(line.strip()))
            except TreeParseError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not trees:
        raise DataError(f"{path}: no trees")
    return DatasetSplit(name, trees)


def load_sst(directory) -> dict[str, DatasetSplit]:
    """Load ``train.txt``, ``dev.txt`` and ``test.txt`` from ``directory``."""
    directory = Path(directory)
    return {name: load_trees(directory / f"{name}.txt", name) for name in SPLIT_NAMES}


def count_labeled_nodes(*splits) -> int:
    total = 0
    for split in splits:
        trees = split.trees if isinstance(split, DatasetSplit) else split
        for tree in trees:
            total += sum(1 for node in tree.preorder() if node.label is not None)
    return total


_BINARY_MAP = {0: 0, 1: 0, 2: None, 3: 1, 4: 1}


def to_binary(tree: SentimentTree) -> Optional[SentimentTree]:
    """Binary-setting view: drops neutral-rooted sentences, merges the
    somewhat-/strong classes and unlabels neutral phrases."""
    if tree.label == 2:
        return None

    def remap(node):
        label = None if node.label is None else _BINARY_MAP[node.label]
        if node.is_leaf:
            return SentimentTree(label, token=node.token)
        return SentimentTree(label, left=remap(node.left), right=remap(node.right))

    return remap(tree)


def extract_phrases(tree: SentimentTree) -> list[tuple[tuple[str, ...], int]]:
    """One (tokens, label) sample per labelled node, in pre-order."""
    return [(tuple(node.leaves()), node.label) for node in tree.preorder() if node.label is not None]


@dataclass(frozen=True)
class TreeArrays:
    """Post-order array encoding consumed by the recurrent kernels."""

    left: np.ndarray
    right: np.ndarray
    leaf_col: np.ndarray
    labels: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.left.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.leaf_col >= 0).sum())


def postorder_arrays(tree: SentimentTree) -> TreeArrays:
    left, right, leaf_col, labels = [], [], [], []
    leaf_counter = 0
    # explicit stack: (node, children_done)
    stack = [(tree, False)]
    ids = []
    while stack:
        node, done = stack.pop()
        if node.is_leaf:
            left.append(-1)
            right.append(-1)
            leaf_col.append(leaf_counter)
            leaf_counter += 1
        elif not done:
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))
            continue
        else:
            r_id = ids.pop()
            l_id = ids.pop()
            left.append(l_id)
            right.append(r_id)
            leaf_col.append(-1)
        labels.append(-1 if node.label is None else node.label)
        ids.append(len(left) - 1)
    as_int = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return TreeArrays(as_int(left), as_int(right), as_int(leaf_col), as_int(labels))
