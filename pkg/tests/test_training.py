import math
from collections import Counter

import numpy as np
import pytest

from cnntreelstm.errors import ConfigError, DataError, NumericError
from cnntreelstm.model import SEQ, TREE
from cnntreelstm.numkernel import SeededRng
from cnntreelstm.optim import AdaGradState, adagrad_step, apply_l2
from cnntreelstm.oracle import oracle_gradient_check
from cnntreelstm.toy import gradcheck_instance, toy_model, toy_treebank
from cnntreelstm.training import (RunResult, TrainConfig, aggregate, evaluate, gradient_check,
                                  model_gradient_check, relative_error, run_protocol, train, training_samples)
from cnntreelstm.treebank import parse_sexpr


# ---------------------------------------------------------------- optimiser


def test_adagrad_scalar_example():
    theta, acc = np.zeros(1), np.zeros(1)
    adagrad_step(theta, np.array([3.0]), acc, 0.1)
    assert acc[0] == 9.0
    assert theta[0] == pytest.approx(-0.1 * 3 / (3 + 1e-8), abs=1e-15)
    assert abs(theta[0] + 0.1) < 1e-8


def test_adagrad_zero_grad_is_noop_and_steps_shrink():
    theta, acc = np.array([0.5]), np.array([2.0])
    adagrad_step(theta, np.zeros(1), acc, 0.1)
    assert theta[0] == 0.5 and acc[0] == 2.0
    theta, acc = np.zeros(1), np.zeros(1)
    adagrad_step(theta, np.ones(1), acc, 0.1)
    first = -theta[0]
    adagrad_step(theta, np.ones(1), acc, 0.1)
    assert -theta[0] - first < first


def test_adagrad_rejects_nan_naming_tensor():
    with pytest.raises(NumericError, match="tree.U"):
        adagrad_step(np.zeros(2), np.array([1.0, np.nan]), np.zeros(2), 0.1, name="tree.U")


def test_adagrad_accumulator_monotone():
    st = AdaGradState()
    theta = np.zeros(4)
    rng = SeededRng(0)
    prev = np.zeros(4)
    for _ in range(10):
        st.step("w", theta, rng.uniform(-1, 1, 4), 0.1)
        assert np.all(st.acc["w"] >= prev)
        prev = st.acc["w"].copy()


def test_l2_examples():
    params = {"W": np.full((1, 1), 2.0), "b": np.full(1, 2.0)}
    grads = {"W": np.zeros((1, 1)), "b": np.zeros(1)}
    apply_l2(grads, params, 1e-4)
    assert grads["W"][0, 0] == pytest.approx(2e-4, abs=1e-18)
    assert grads["b"][0] == 0.0
    g0 = {"W": np.ones((1, 1))}
    apply_l2(g0, {"W": np.ones((1, 1))}, 0.0)
    assert g0["W"][0, 0] == 1.0


# ---------------------------------------------------------------- config and aggregation


def test_train_config_defaults_and_validation():
    c = TrainConfig()
    assert (c.model_lr, c.word_lr, c.l2, c.batch_size, c.epochs) == (0.01, 0.1, 1e-4, 25, 60)
    assert (c.conv_input_dropout, c.conv_output_dropout, c.output_dropout) == (0.5, 0.2, 0.5)
    for bad in ({"output_dropout": 1.0}, {"batch_size": 0}, {"l2": -1.0}, {"setting": "x"}, {"epochs": 0}):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


def test_aggregate_examples():
    assert aggregate([1, 2, 3, 4, 5])[0] == 3 and aggregate([1, 2, 3, 4, 5])[2] == 5
    assert aggregate([0.7])[1] == 0.0
    mean, std, mx = aggregate([88.9, 88.7, 88.9, 88.8, 88.8])
    # population std: deviations .08 -.12 .08 -.02 -.02, squares sum to .028
    assert mean == pytest.approx(88.82, abs=1e-12)
    assert std == pytest.approx(math.sqrt(0.028 / 5), abs=1e-12)
    assert mx >= mean


def test_run_protocol_uses_consecutive_seeds():
    seen = []

    def runner(seed):
        seen.append(seed)
        return RunResult(seed, 0.0, float(seed), 1)

    rep = run_protocol(runner, seed=10, n_runs=5)
    assert seen == [10, 11, 12, 13, 14]
    assert rep.mean == 12 and rep.max == 14
    with pytest.raises(ConfigError):
        run_protocol(runner, n_runs=0)


# ---------------------------------------------------------------- evaluation


def zero_model(kind=TREE):
    m = toy_model(kind, memory=4, filters=((3, 2),), dims=(4,))
    for t in m.params().values():
        t[...] = 0
    return m


def test_zero_model_accuracy_follows_tie_rule():
    m = zero_model()
    trees = toy_treebank()
    samples = [m.prepare_tree(t) for t in trees]
    hist = Counter(t.label for t in trees)
    # uniform probabilities: argmax picks class 0 for every sentence
    assert evaluate(m, samples) == hist[0] / len(trees)


def test_accuracy_matches_brute_force_count():
    m = toy_model(memory=4, filters=((3, 2),), dims=(4,), seed=3)
    trees = toy_treebank()
    samples = [m.prepare_tree(t) for t in trees]
    preds = [int(np.argmax(m.sentence_probs(s))) for s in samples]
    assert evaluate(m, samples) == sum(p == t.label for p, t in zip(preds, trees)) / len(trees)
    assert evaluate(m, []) == 0.0


def test_sequence_model_trains_on_every_labelled_phrase():
    m = toy_model(SEQ, memory=4, filters=((3, 2),), dims=(4,))
    trees = toy_treebank()
    samples = training_samples(m, trees)
    assert len(samples) == sum(1 for t in trees for n in t.preorder() if n.label is not None)
    assert len(training_samples(zero_model(), trees)) == len(trees)


# ---------------------------------------------------------------- gradient accumulation and the loop


def test_batch_of_identical_samples_scales_gradient():
    m = toy_model(memory=4, filters=((3, 2),), dims=(4,), seed=1)
    s = m.prepare_tree(toy_treebank()[0])
    one, e1 = m.new_grads()
    m.accumulate(s, one, e1)
    many, e25 = m.new_grads()
    for _ in range(25):
        m.accumulate(s, many, e25)
    for name in one:
        assert np.allclose(many[name], 25 * one[name], rtol=1e-12, atol=1e-15)
    idx1, rows1 = e1[0].merged()
    idx25, rows25 = e25[0].merged()
    dense1 = np.zeros_like(m.embedder.channels[0].table)
    dense25 = np.zeros_like(dense1)
    np.add.at(dense1, idx1, rows1)
    np.add.at(dense25, idx25, rows25)
    assert np.allclose(dense25, 25 * dense1, rtol=1e-12, atol=1e-15)


def test_one_update_per_batch():
    m = toy_model(memory=4, filters=((3, 2),), dims=(4,))
    samples = [m.prepare_tree(t) for t in toy_treebank()] * 6  # 60 samples
    res = train(m, samples, [], [], TrainConfig(epochs=2))
    assert res.updates == 2 * math.ceil(60 / 25)
    assert len(res.train_loss) == 2 and all(math.isfinite(x) for x in res.train_loss)


def test_training_is_deterministic():
    def run():
        m = toy_model(memory=4, filters=((3, 2),), dims=(4,), seed=2)
        samples = [m.prepare_tree(t) for t in toy_treebank()]
        res = train(m, samples, samples[:5], samples[5:], TrainConfig(epochs=3, seed=2))
        return res, m.snapshot()

    (r1, s1), (r2, s2) = run(), run()
    assert r1 == r2
    for name in s1[0]:
        assert np.array_equal(s1[0][name], s2[0][name])
    assert all(np.array_equal(a, b) for a, b in zip(s1[1], s2[1]))


def test_best_dev_parameters_restored():
    m = toy_model(memory=4, filters=((3, 2),), dims=(4,), seed=4)
    samples = [m.prepare_tree(t) for t in toy_treebank()]
    snaps = {}

    def on_epoch(epoch, loss, dev):
        snaps[epoch] = (dev, m.snapshot())

    res = train(m, samples, samples[:5], samples[5:], TrainConfig(epochs=6), on_epoch=on_epoch)
    best_epoch = max(snaps, key=lambda e: (snaps[e][0], -e))
    assert res.best_epoch == best_epoch
    assert res.best_dev == snaps[best_epoch][0]
    for name, theta in m.params().items():
        assert np.array_equal(theta, snaps[best_epoch][1][0][name])
    assert res.test == evaluate(m, samples[5:])


def test_empty_training_set_and_nan_abort():
    m = toy_model(memory=4, filters=((3, 2),), dims=(4,))
    with pytest.raises(DataError):
        train(m, [], [], [], TrainConfig(epochs=1))
    samples = [m.prepare_tree(t) for t in toy_treebank()]
    m.head.Ws[0, 0] = np.nan
    with pytest.raises(NumericError, match="epoch 1, batch 0"):
        train(m, samples, [], [], TrainConfig(epochs=1))


# ---------------------------------------------------------------- gradient checking


def test_gradient_check_exact_on_linear_model():
    w = np.array([0.3, -1.2, 2.0])
    x = np.array([1.5, 0.25, -0.75])
    worst, per = gradient_check(lambda: float(w @ x), {"w": w}, {"w": x.copy()})
    assert worst < 1e-10 and set(per) == {"w"}


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-12, 0.0) == pytest.approx(1e-4)
    assert relative_error(2.0, 1.0) == 0.5


@pytest.mark.parametrize("kind", [TREE, SEQ])
@pytest.mark.parametrize("seed", range(5))
def test_model_gradients_match_finite_differences(kind, seed):
    model, sample = gradcheck_instance(kind, seed=seed)
    assert sample.arrays is None or sample.arrays.n_leaves <= 7
    worst, per = oracle_gradient_check(model, sample)
    assert worst < 1e-6, per
    names = set(per)
    assert {"conv.W3", "conv.W5", "embedding.emb0", "embedding.emb1"} <= names
    assert any(n.startswith("tree." if kind == TREE else "lstm.") for n in names)


@pytest.mark.parametrize("kind", [TREE, SEQ])
def test_float64_self_check_agrees_in_absolute_terms(kind):
    model, sample = gradcheck_instance(kind, seed=11)
    _, per64 = model_gradient_check(model, sample)
    _, perx = oracle_gradient_check(model, sample)
    assert set(per64) == set(perx)


@pytest.mark.parametrize("fault", ["tree.U", "conv.W5", "embedding.emb1", "tree.bs"])
def test_fault_injection_is_detected(fault):
    model, sample = gradcheck_instance(TREE, seed=1)
    model.fault = fault
    worst, per = oracle_gradient_check(model, sample)
    assert worst > 1e-2
    assert per[fault] > 1e-2


def test_eval_mode_gradient_check():
    model, sample = gradcheck_instance(SEQ, seed=2)
    worst, _ = oracle_gradient_check(model, sample, train=False)
    assert worst < 1e-6


def test_reference_loss_matches_model_loss():
    from cnntreelstm.oracle import reference_loss

    for kind in (TREE, SEQ):
        model, sample = gradcheck_instance(kind, seed=5)
        conv_cache, head = model.forward(sample, train=True, rng=SeededRng(3))
        tensors = dict(model.params())
        for k, ch in enumerate(model.embedder.channels):
            tensors[f"embedding.{k}"] = ch.table
        ref = reference_loss(model.spec, tensors, sample.indices, sample.arrays, sample.label,
                             (conv_cache.in_mask, conv_cache.out_mask, head.out_mask), np.float64)
        assert abs(ref - head.loss) <= 1e-12 * max(1.0, abs(head.loss))


def test_parse_for_zero_loss_oracle():
    # labelled-node count times ln z for a zero model, any tree
    m = zero_model()
    t = parse_sexpr("(1 (2 (3 a) (4 b)) (0 c))")
    assert abs(m.loss(m.prepare_tree(t)) - 5 * math.log(5)) < 1e-9
