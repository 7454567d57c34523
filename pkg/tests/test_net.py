import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agreeset.net import (
    Activation,
    CompositionError,
    Layer,
    Network,
    ParseError,
    ShapeError,
    activations,
    concatenate,
    difference_network,
    dumps,
    evaluate,
    load,
    loads,
    random_network,
    save,
)


def test_toy_outputs(toy):
    assert evaluate(toy, [2, 1]).tolist() == [14.0]
    assert evaluate(toy, [1, 3]).tolist() == [26.0]


def test_toy_hidden_values(toy):
    (pre, post), _ = activations(toy, [2, 1])
    assert pre.tolist() == [7.0, -6.0]
    assert post.tolist() == [7.0, 0.0]


def test_zero_weights_propagate_bias():
    net = Network((Layer(np.zeros((3, 2)), [1.0, -1.0, 2.0]), Layer(np.zeros((1, 3)), [5.0], "identity")))
    assert evaluate(net, [3.0, -7.0]).tolist() == [5.0]


def test_batch_evaluation_matches_rows(toy):
    xs = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert evaluate(toy, xs).reshape(-1).tolist() == [14.0, 26.0]


def test_wrong_input_dim(toy):
    with pytest.raises(ShapeError):
        evaluate(toy, [1.0, 2.0, 3.0])


def test_layer_validation():
    with pytest.raises(ValueError):
        Layer([[1.0, 2.0]], [0.0, 1.0])
    with pytest.raises(ValueError):
        Layer([[np.nan]], [0.0])
    with pytest.raises(ValueError):
        Network((Layer([[1.0]], [0.0], Activation.RELU),))
    with pytest.raises(ValueError):
        Network((Layer(np.ones((2, 2)), np.zeros(2)), Layer(np.ones((1, 3)), [0.0], "identity")))


def test_concatenate_self(toy):
    assert evaluate(concatenate(toy, toy), [2, 1]).tolist() == [14.0, 14.0]


def test_concatenate_widths():
    rng = np.random.default_rng(0)
    a = random_network(rng, 3, [2])
    b = random_network(rng, 3, [3])
    assert concatenate(a, b).hidden_widths[0] == 5


def test_concatenate_different_depths():
    rng = np.random.default_rng(1)
    a = random_network(rng, 2, [3, 2, 4])
    b = random_network(rng, 2, [5])
    joint = concatenate(a, b)
    xs = rng.uniform(-3, 3, (50, 2))
    assert np.allclose(evaluate(joint, xs), np.hstack([evaluate(a, xs), evaluate(b, xs)]))


def test_concatenate_input_mismatch():
    rng = np.random.default_rng(2)
    with pytest.raises(CompositionError):
        concatenate(random_network(rng, 2, [2]), random_network(rng, 3, [2]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_concatenate_property(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    a = random_network(rng, d, list(rng.integers(1, 5, int(rng.integers(0, 4)))))
    b = random_network(rng, d, list(rng.integers(1, 5, int(rng.integers(0, 4)))))
    xs = rng.uniform(-5, 5, (100, d))
    assert np.allclose(evaluate(concatenate(a, b), xs), np.hstack([evaluate(a, xs), evaluate(b, xs)]))


def test_difference_network(toy, doubled):
    diff = difference_network(concatenate(toy, doubled), [1.0, -1.0])
    assert evaluate(diff, [2, 1]).tolist() == [-14.0]


def test_roundtrip(tmp_path, toy):
    path = tmp_path / "toy.ffnt"
    save(toy, path)
    again = load(path)
    assert evaluate(again, [2, 1]).tolist() == [14.0]
    assert dumps(again) == dumps(toy)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_roundtrip_bit_exact(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 3, [4, 2])
    again = loads(dumps(net))
    for a, b in zip(net.layers, again.layers):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_parse_errors(toy):
    with pytest.raises(ParseError):
        loads("")
    lines = dumps(toy).splitlines()
    # drop the last layer's lines: the header still announces two layers
    truncated = "\n".join(lines[: len(lines) // 2 + 1])
    with pytest.raises(ParseError):
        loads(truncated)
