import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cnntreelstm.corpusprep import (GloveTrainConfig, ReviewRecord, build_cooccurrence, build_vocabulary,
                                    glove_channel, glove_objective, glove_train, glove_weight, group_sort,
                                    group_sort_dump, ingest_reviews, tokenize)
from cnntreelstm.errors import ConfigError, DataError

TOY_REVIEWS = [
    "the movie was great and the acting was great",
    "the plot was dull and the movie was long",
    "a great film with a great cast",
    "the film was dull , the cast was weak",
] * 5


def review(asin, overall, text="t"):
    return json.dumps({"asin": asin, "overall": overall, "reviewText": text})


def test_ingest_examples():
    stats = Counter()
    recs = ingest_reviews([review("A1", 5.0, "good"), json.dumps({"asin": "A2", "overall": 3}),
                           "not json", "", review("A3", 9, "x"), review("A4", 1, "bad")], stats)
    assert recs == [ReviewRecord("A1", 5.0, "good"), ReviewRecord("A4", 1.0, "bad")]
    assert stats["skipped"] == 3 and stats["records"] == 2


def test_ingest_keeps_input_order():
    lines = [review("A", 5, "x"), review("B", 1, "y"), review("A", 2, "z")]
    assert [r.review_text for r in ingest_reviews(lines)] == ["x", "y", "z"]


def test_group_sort_example():
    recs = [ReviewRecord("A", 5, "a5"), ReviewRecord("B", 1, "b1"), ReviewRecord("A", 2, "a2")]
    assert [r.review_text for r in group_sort(recs)] == ["a2", "a5", "b1"]
    assert group_sort_dump(recs) == "a2\na5\nb1\n"
    assert group_sort_dump(recs[:1]) == "a5\n"


def test_group_sort_is_stable():
    recs = [ReviewRecord("A", 3, "first"), ReviewRecord("A", 1, "low"), ReviewRecord("A", 3, "second")]
    assert [r.review_text for r in group_sort(recs)] == ["low", "first", "second"]


@given(st.lists(st.tuples(st.sampled_from("ABCD"), st.integers(1, 5)), max_size=30))
def test_group_sort_is_a_permutation(items):
    recs = [ReviewRecord(a, float(o), f"{i}") for i, (a, o) in enumerate(items)]
    out = group_sort(recs)
    assert Counter(out) == Counter(recs)
    # contiguous groups in first-seen order, ascending inside
    order = list(dict.fromkeys(r.asin for r in recs))
    assert [r.asin for r in out] == [a for a in order for r in recs if r.asin == a]
    for a in order:
        ratings = [r.overall for r in out if r.asin == a]
        assert ratings == sorted(ratings)


def test_dump_normalizes_whitespace():
    assert group_sort_dump([ReviewRecord("A", 1, "two\nlines  here ")]) == "two lines here\n"


@pytest.mark.parametrize("text,tokens", [
    ("Good movie!", ["good", "movie", "!"]),
    ("(great)", ["-LRB-", "great", "-RRB-"]),
    ("don't", ["do", "n't"]),
    ("It's \"fine\", really...", ["it", "'s", "\"", "fine", "\"", ",", "really", ".", ".", "."]),
    ("", []),
])
def test_tokenize_examples(text, tokens):
    assert tokenize(text) == tokens


@given(st.text(alphabet="abcXYZ '()!,.-\"n", max_size=40))
def test_tokenize_idempotent(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


def test_cooccurrence_hand_counts():
    table, vocab = build_cooccurrence([["a", "b", "a"]], window=20, min_count=1)
    a, b = vocab.index["a"], vocab.index["b"]
    assert table.get(a, b) == 2.0
    assert table.get(b, a) == 2.0
    assert table.get(a, a) == 0.5
    assert table.get(b, b) == 0.0


def test_window_one_counts_adjacent_pairs_only():
    table, vocab = build_cooccurrence([["a", "b", "c"]], window=1, min_count=1)
    i = vocab.index
    assert table.get(i["a"], i["b"]) == 1 and table.get(i["b"], i["c"]) == 1
    assert table.get(i["a"], i["c"]) == 0


def test_min_count_filters_everything():
    with pytest.raises(DataError):
        build_cooccurrence([["a", "b", "c"]], window=20, min_count=5)
    with pytest.raises(DataError):
        build_cooccurrence([[]], window=5, min_count=1)


def test_documents_run_together_unless_reset():
    docs = [["a"], ["b"]]
    joined, v = build_cooccurrence(docs, window=5, min_count=1)
    assert joined.get(v.index["a"], v.index["b"]) == 1.0
    reset, v = build_cooccurrence(docs, window=5, min_count=1, reset_at_boundaries=True)
    assert reset.get(v.index["a"], v.index["b"]) == 0.0


def test_rare_words_removed_before_windowing():
    table, v = build_cooccurrence([["a", "rare", "b", "a", "b"]], window=1, min_count=2)
    assert "rare" not in v
    # with "rare" gone, a-b are adjacent three times
    assert table.get(v.index["a"], v.index["b"]) == 3.0


def test_cooccurrence_matches_brute_force():
    tokens = tokenize(" ".join(TOY_REVIEWS[:4]))
    table, vocab = build_cooccurrence([tokens], window=4, min_count=1)
    brute = Counter()
    for p in range(len(tokens)):
        for q in range(p + 1, min(len(tokens), p + 5)):
            a, b = sorted((vocab.index[tokens[p]], vocab.index[tokens[q]]))
            brute[a, b] += 1.0 / (q - p)
    assert len(table) == len(brute)
    for (a, b), val in brute.items():
        assert table.get(a, b) == pytest.approx(val, rel=1e-14)


def test_vocabulary_order():
    v = build_vocabulary([["b", "a", "c", "a", "b", "d"]], 1)
    assert v.words == ["a", "b", "c", "d"]


def test_glove_weight_cap():
    assert glove_weight(100.0) == 1.0
    assert np.all(glove_weight([100.0, 250.0, 1e6]) == 1.0)
    assert glove_weight(50.0) == pytest.approx(0.5 ** 0.75)


def test_glove_config_validation():
    for bad in ({"x_max": 0}, {"alpha": 0}, {"dim": 0}, {"learning_rate": 0}):
        with pytest.raises(ConfigError):
            GloveTrainConfig(**bad)


def test_glove_objective_strictly_decreases_on_toy_corpus():
    docs = [tokenize(s) for s in TOY_REVIEWS]
    table, vocab = build_cooccurrence(docs, window=5, min_count=2)
    model = glove_train(table, GloveTrainConfig(dim=10, window=5, min_count=2, iterations=10))
    assert len(model.history) == 11
    assert all(b < a for a, b in zip(model.history, model.history[1:]))


def test_glove_two_word_corpus_converges():
    table, vocab = build_cooccurrence([["a", "b"] * 20], window=3, min_count=1)
    model = glove_train(table, GloveTrainConfig(dim=4, window=3, min_count=1, iterations=500))
    rows, cols, vals = table.directed()
    assert glove_objective(model.W, model.Wc, model.b, model.bc, rows, cols, vals, 100.0, 0.75) < 1e-2
    ch = glove_channel(model, vocab)
    assert ch.table.shape == (2, 4)
    assert np.array_equal(ch.table, model.W + model.Wc)


def test_glove_is_seeded():
    table, _ = build_cooccurrence([["a", "b", "c"] * 5], window=2, min_count=1)
    cfg = GloveTrainConfig(dim=3, iterations=3, min_count=1)
    a, b = glove_train(table, cfg), glove_train(table, cfg)
    assert np.array_equal(a.W, b.W) and a.history == b.history
