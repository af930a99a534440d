import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cnntreelstm.convolution import ConvFilterBank, conv_backward, conv_forward
from cnntreelstm.errors import ConfigError, ShapeError
from cnntreelstm.numkernel import SeededRng
from cnntreelstm.training import gradient_check


def single_filter_bank(weights, bias=0.0, activation="identity"):
    W = np.asarray(weights, dtype=float)[None, None, :]
    return ConvFilterBank(1, {W.shape[2]: W}, {W.shape[2]: np.array([bias])}, activation=activation)


def test_hand_convolution_example():
    bank = single_filter_bank([1, 1, 1])
    P, _ = conv_forward(bank, np.array([[1.0, 2.0, 3.0]]))
    assert P.tolist() == [[3.0, 6.0, 5.0]]


def test_hand_backward_example():
    bank = single_filter_bank([1, 1, 1])
    P, cache = conv_forward(bank, np.array([[1.0, 2.0, 3.0]]))
    dX, g = conv_backward(bank, cache, np.ones((1, 3)))
    # column j of X feeds outputs j-1, j, j+1 (those that exist)
    assert dX.tolist() == [[2.0, 3.0, 2.0]]
    # tap k sees x shifted by k-1 with zero padding: [0,1,2], [1,2,3], [2,3,0]
    assert g["conv.W3"].tolist() == [[[3.0, 6.0, 5.0]]]
    assert g["conv.b3"].tolist() == [3.0]


def test_zero_weights_give_zero_maps():
    bank = ConvFilterBank(4, {3: np.zeros((2, 4, 3)), 5: np.zeros((2, 4, 5))}, {3: np.zeros(2), 5: np.zeros(2)})
    P, _ = conv_forward(bank, SeededRng(0).uniform(-1, 1, (4, 6)))
    assert P.shape == (4, 6) and not P.any()


def test_single_word_wide_filter():
    bank = ConvFilterBank.init(3, ((5, 2),), SeededRng(1))
    P, _ = conv_forward(bank, np.ones((3, 1)))
    assert P.shape == (2, 1)


@settings(max_examples=60)
@given(st.integers(1, 30), st.sampled_from([1, 3, 5, 7, 9]), st.integers(0, 1000))
def test_feature_map_length_equals_sentence_length(n, width, seed):
    bank = ConvFilterBank.init(3, ((width, 3),), SeededRng(seed))
    P, _ = conv_forward(bank, SeededRng(seed + 1).uniform(-1, 1, (3, n)))
    assert P.shape == (3, n)


def test_rejects_even_width_and_bad_shapes():
    with pytest.raises(ConfigError):
        ConvFilterBank.init(3, ((4, 2),))
    with pytest.raises(ConfigError):
        ConvFilterBank.init(3, ((3, 2), (3, 1)))
    bank = ConvFilterBank.init(3, ((3, 2),))
    with pytest.raises(ShapeError):
        conv_forward(bank, np.ones((4, 5)))
    _, cache = conv_forward(bank, np.ones((3, 5)))
    with pytest.raises(ShapeError):
        conv_backward(bank, cache, np.ones((2, 4)))


def test_init_bounds_and_param_names():
    bank = ConvFilterBank.init(300, ((3, 100), (5, 100)), SeededRng(0))
    assert list(bank.params()) == ["conv.W3", "conv.b3", "conv.W5", "conv.b5"]
    assert np.abs(bank.weights[3]).max() <= np.sqrt(6 / 901)
    assert np.abs(bank.weights[5]).max() <= np.sqrt(6 / 1501)
    assert sum(t.size for t in bank.params().values()) == 100 * 901 + 100 * 1501


def test_filter_view_orders_by_width():
    bank = ConvFilterBank.init(2, ((5, 1), (3, 2)), SeededRng(0))
    assert [bank.filter(v).width for v in range(3)] == [3, 3, 5]
    with pytest.raises(IndexError):
        bank.filter(3)


def test_eval_mode_and_rate_zero_train_mode_agree():
    X = SeededRng(3).uniform(-1, 1, (4, 7))
    bank = ConvFilterBank.init(4, ((3, 3),), SeededRng(2))
    P_eval, _ = conv_forward(bank, X)
    assert np.array_equal(P_eval, conv_forward(bank, X)[0])
    quiet = ConvFilterBank(4, bank.weights, bank.biases, input_dropout=0.0, output_dropout=0.0)
    assert np.array_equal(conv_forward(quiet, X, train=True, rng=SeededRng(9))[0], P_eval)


def test_dropout_is_per_column():
    X = np.ones((6, 40))
    bank = ConvFilterBank(6, {1: np.ones((3, 6, 1))}, {1: np.zeros(3)}, activation="identity")
    P, cache = conv_forward(bank, X, train=True, rng=SeededRng(5))
    # whole columns are either kept or dropped
    for j in range(40):
        col = P[:, j]
        assert np.all(col == col[0])
    assert set(np.unique(cache.in_mask)) <= {0.0, 2.0}
    assert set(np.unique(cache.out_mask)) <= {0.0, 1.25}


def test_translation_alignment():
    rng = SeededRng(4)
    X = rng.uniform(-1, 1, (2, 6))
    bank = ConvFilterBank.init(2, ((3, 2), (5, 2)), rng, activation="tanh")
    P, _ = conv_forward(bank, X)
    Xs = np.concatenate([np.zeros((2, 1)), X], axis=1)
    Ps, _ = conv_forward(bank, Xs)
    # interior columns (away from both borders) shift right by one
    half = 2
    assert np.allclose(Ps[:, 1 + half:6 - half + 1], P[:, half:6 - half], atol=1e-14)


def test_zero_upstream_gradient():
    bank = ConvFilterBank.init(3, ((3, 2),), SeededRng(0))
    _, cache = conv_forward(bank, np.ones((3, 4)))
    dX, g = conv_backward(bank, cache, np.zeros((2, 4)))
    assert not dX.any() and not any(v.any() for v in g.values())


@pytest.mark.parametrize("activation", ["tanh", "identity", "relu"])
@pytest.mark.parametrize("seed", range(3))
def test_backward_matches_finite_differences(activation, seed):
    rng = SeededRng(100 + seed)
    bank = ConvFilterBank.init(3, ((3, 2), (5, 2)), rng, activation=activation)
    for b in bank.biases.values():
        b[...] = rng.uniform(-0.5, 0.5, b.shape)
    X = rng.uniform(-1, 1, (3, 5))
    R = rng.uniform(-1, 1, (4, 5))

    def loss():
        P, _ = conv_forward(bank, X, train=True, rng=SeededRng(seed))
        return float(np.sum(R * P))

    _, cache = conv_forward(bank, X, train=True, rng=SeededRng(seed))
    dX, grads = conv_backward(bank, cache, R)
    tensors = dict(bank.params(), X=X)
    grads["X"] = dX
    worst, _ = gradient_check(loss, tensors, grads)
    assert worst < 1e-6
