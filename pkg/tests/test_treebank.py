from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from cnntreelstm.errors import ConfigError, DataError, TreeParseError
from cnntreelstm.numkernel import SeededRng
from cnntreelstm.toy import random_tree
from cnntreelstm.treebank import (BINARY, FINE_GRAINED, SentimentTree, TaskSetting, count_labeled_nodes,
                                  extract_phrases, load_sst, load_trees, parse_sexpr, postorder_arrays,
                                  serialize_sexpr, to_binary)


def test_parse_minimal_tree():
    t = parse_sexpr("(3 (2 a) (4 b))")
    assert t.label == 3
    assert (t.left.token, t.left.label) == ("a", 2)
    assert (t.right.token, t.right.label) == ("b", 4)
    assert t.leaves() == ["a", "b"]


def test_parse_single_leaf():
    t = parse_sexpr("(2 hello)")
    assert t.is_leaf and t.token == "hello" and t.label == 2


def test_ptb_escapes_kept_verbatim():
    t = parse_sexpr("(2 (2 -LRB-) (2 Hi))")
    assert t.leaves() == ["-LRB-", "Hi"]


@pytest.mark.parametrize("text,offset", [
    ("(3 (2 a) (4 b)", 14),        # unbalanced
    ("(5 a)", 1),                   # label outside 0-4
    ("(3 (2 a))", 1),               # unary internal node: points at the node
    ("(3 (2 a) (2 b) (2 c))", 1),   # ternary
    ("(2 )", 3),                    # empty token
    ("(2 a) junk", 6),              # trailing text
])
def test_parse_errors_carry_byte_offset(text, offset):
    with pytest.raises(TreeParseError) as exc:
        parse_sexpr(text)
    assert exc.value.offset == offset


def test_error_offset_counts_bytes_not_chars():
    with pytest.raises(TreeParseError) as exc:
        parse_sexpr("(3 (2 é) (9 b))")
    # "é" is two bytes in UTF-8
    assert exc.value.offset == 11


def test_serialize_examples():
    assert serialize_sexpr(SentimentTree(2, token="a")) == "(2 a)"
    assert serialize_sexpr(parse_sexpr("(3 (2 a) (4 b))")) == "(3 (2 a) (4 b))"
    assert serialize_sexpr(parse_sexpr("  (3\n(2   a)\t(4 b) ) ")) == "(3 (2 a) (4 b))"


@settings(max_examples=100)
@given(st.integers(0, 2**32), st.integers(1, 12))
def test_random_tree_round_trip(seed, n):
    rng = SeededRng(seed)
    t = random_tree(rng, [f"t{i}" for i in range(n)])
    text = serialize_sexpr(t)
    assert parse_sexpr(text) == t
    assert serialize_sexpr(parse_sexpr(text)) == text
    # binary-tree identities
    nodes = list(t.preorder())
    assert len(t.leaves()) == n
    assert sum(1 for x in nodes if not x.is_leaf) == n - 1


def test_count_labeled_nodes_examples():
    assert count_labeled_nodes([parse_sexpr("(3 (2 a) (4 b))")]) == 3
    assert count_labeled_nodes([parse_sexpr("(1 a)")], [parse_sexpr("(4 b)")]) == 2


def test_to_binary_examples():
    assert to_binary(parse_sexpr("(2 (3 a) (4 b))")) is None
    t = to_binary(parse_sexpr("(4 (2 a) (3 b))"))
    assert t.label == 1 and t.left.label is None and t.right.label == 1
    t = to_binary(parse_sexpr("(0 (1 a) (2 b))"))
    assert (t.label, t.left.label, t.right.label) == (0, 0, None)


@settings(max_examples=100)
@given(st.integers(0, 2**32), st.integers(1, 9))
def test_binary_labels_in_range(seed, n):
    t = to_binary(random_tree(SeededRng(seed), [f"t{i}" for i in range(n)]))
    if t is not None:
        labels = {x.label for x in t.preorder()} - {None}
        assert labels <= {0, 1}
        assert t.leaves() == [f"t{i}" for i in range(n)]


def test_task_setting():
    assert TaskSetting(FINE_GRAINED).num_classes == 5
    assert TaskSetting(BINARY).num_classes == 2
    with pytest.raises(ConfigError):
        TaskSetting("ternary")


def test_extract_phrases_example():
    got = extract_phrases(parse_sexpr("(3 (2 a) (4 b))"))
    assert got == [(("a", "b"), 3), (("a",), 2), (("b",), 4)]


def test_unlabeled_node_contributes_nothing():
    t = to_binary(parse_sexpr("(4 (2 a) (3 b))"))
    assert extract_phrases(t) == [(("a", "b"), 1), (("b",), 1)]


def test_phrases_match_brute_force_span_enumeration():
    text = "(1 (2 (2 the) (3 (2 very) (3 good))) (0 (2 bad) (1 end)))"
    tree = parse_sexpr(text)
    tokens = tree.leaves()
    # brute force: a span (i, j) is a phrase iff its bracket appears in the
    # string, found by scanning parenthesis depths character by character.
    spans = []
    stack = []
    leaf = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            label = int(text[i + 1])
            stack.append((label, leaf))
            i += 2
            continue
        if ch == ")":
            label, start = stack.pop()
            spans.append((tuple(tokens[start:leaf]), label))
        elif not ch.isspace():
            j = i
            while text[j] not in " ()":
                j += 1
            leaf += 1
            i = j
            continue
        i += 1
    assert Counter(extract_phrases(tree)) == Counter(spans)
    assert len(extract_phrases(tree)) == count_labeled_nodes([tree])


def test_postorder_arrays_layout():
    a = postorder_arrays(parse_sexpr("(3 (2 a) (4 b))"))
    assert a.left.tolist() == [-1, -1, 0]
    assert a.right.tolist() == [-1, -1, 1]
    assert a.leaf_col.tolist() == [0, 1, -1]
    assert a.labels.tolist() == [2, 4, 3]
    assert a.n_nodes == 3 and a.n_leaves == 2


def test_load_trees_and_sst(tmp_path):
    for name, lines in (("train", ["(3 (2 a) (4 b))", "(1 x)"]), ("dev", ["(2 c)"]), ("test", ["(4 d)"])):
        (tmp_path / f"{name}.txt").write_text("\n".join(lines) + "\n\n")
    splits = load_sst(tmp_path)
    assert [len(splits[k]) for k in ("train", "dev", "test")] == [2, 1, 1]
    assert count_labeled_nodes(*splits.values()) == 6


def test_load_trees_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("(2 a)\n(3 (2 a)\n")
    with pytest.raises(DataError, match="bad.txt:2"):
        load_trees(bad)
    with pytest.raises(DataError):
        load_trees(tmp_path / "missing.txt")
    empty = tmp_path / "empty.txt"
    empty.write_text("\n")
    with pytest.raises(DataError):
        load_trees(empty)
