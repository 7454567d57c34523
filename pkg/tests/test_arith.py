import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agreeset.arith import (
    TrainConfig,
    ensemble_predict,
    evaluate_errors,
    gen_dataset,
    init_network,
    make_rng,
    train,
    train_pool,
)
from agreeset.net import Activation, Layer, Network, evaluate, random_network

from conftest import affine


def test_labels_in_range():
    data = gen_dataset(5000, d=10, low=-10, high=10, seed=0)
    assert np.all(np.abs(data.labels) <= 20)
    assert data.inputs.shape == (5000, 10)


def test_constant_box():
    data = gen_dataset(10, d=3, low=2.5, high=2.5)
    assert np.all(data.inputs == 2.5) and np.all(data.labels == 5.0)


def test_dataset_deterministic():
    a, b = gen_dataset(100, seed=7), gen_dataset(100, seed=7)
    assert np.array_equal(a.inputs, b.inputs)
    assert not np.array_equal(a.inputs, gen_dataset(100, seed=8).inputs)


def test_dataset_validation():
    with pytest.raises(ValueError):
        gen_dataset(10, d=1)
    with pytest.raises(ValueError):
        gen_dataset(10, low=1, high=0)


def test_training_learns_sum():
    data = gen_dataset(4000, d=2, seed=0)
    net = train(TrainConfig(epochs=10, hidden=(8,), seed=0), data)
    stats = evaluate_errors(net, d=2, n_samples=2000, seed=1)
    assert stats.mean_abs_error <= 0.5


def test_zero_epochs_is_init():
    data = gen_dataset(50, d=3)
    cfg = TrainConfig(epochs=0, hidden=(4,), seed=3)
    net = train(cfg, data)
    ref = init_network(3, (4,), make_rng(3))
    for a, b in zip(net.layers, ref.layers):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_training_bit_identical():
    data = gen_dataset(300, d=3)
    cfg = TrainConfig(epochs=2, hidden=(5, 5), seed=11)
    a, b = train(cfg, data), train(cfg, data)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.weights, lb.weights) and np.array_equal(la.bias, lb.bias)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(hidden=(0,))


def test_perfect_net_has_zero_error():
    net = affine([1.0, 1.0, 0.0])
    assert evaluate_errors(net, d=3, low=-100, high=100, n_samples=500).max_abs_error == 0.0


def test_zero_net_error_statistics():
    net = affine([0.0, 0.0])
    s = evaluate_errors(net, d=2, low=-10, high=10, n_samples=200_000, seed=2)
    # |U1 + U2| for U uniform on [-10, 10] has mean 20/3 and supremum 20
    assert s.mean_abs_error == pytest.approx(20 / 3, rel=0.01)
    assert 19 < s.max_abs_error <= 20


def test_error_stats_deterministic():
    net = random_network(np.random.default_rng(0), 4, [3])
    assert evaluate_errors(net, d=4, seed=3) == evaluate_errors(net, d=4, seed=3)


def test_ensemble_mean():
    one, three = affine([0.0], 1.0), affine([0.0], 3.0)
    assert ensemble_predict([one, three], [[5.0]]).tolist() == [[2.0]]
    net = random_network(np.random.default_rng(1), 2, [3])
    x = np.random.default_rng(2).normal(size=(20, 2))
    assert np.array_equal(ensemble_predict([net], x), evaluate(net, x))
    neg = Network(net.layers[:-1] + (Layer(-net.layers[-1].weights, -net.layers[-1].bias, Activation.IDENTITY),))
    assert np.allclose(ensemble_predict([net, neg], x), 0.0)
    with pytest.raises(ValueError):
        ensemble_predict([], x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_ensemble_error_convexity(seed):
    rng = np.random.default_rng(seed)
    nets = [random_network(rng, 3, [4]) for _ in range(int(rng.integers(1, 5)))]
    x = rng.uniform(-5, 5, (200, 3))
    target = x[:, 0] + x[:, 1]
    ens = np.abs(ensemble_predict(nets, x)[:, 0] - target).max()
    members = max(np.abs(evaluate(n, x)[:, 0] - target).max() for n in nets)
    assert ens <= members + 1e-9


def test_train_pool_small():
    pool = train_pool([0, 1], TrainConfig(epochs=1, hidden=(4,)), n_train=200, d=3,
                      ood_range=(-50, 50), n_eval=100)
    assert [e.seed for e in pool] == [0, 1]
    assert all(e.ood.tag == "ood" and e.in_dist.tag == "in-dist" for e in pool)
