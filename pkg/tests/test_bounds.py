import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agreeset.bounds import Box, BoxError, compute_bounds, interval_propagate, linear_relax, relu_relaxation
from agreeset.net import Activation, Layer, Network, activations, evaluate, random_network


def test_toy_intervals(toy, toy_box):
    b = interval_propagate(toy, toy_box)
    # bounds are widened outward by a tiny relative slack
    assert b.pre_lower[0] == pytest.approx([1.0, -32.0], abs=1e-6)
    assert b.pre_upper[0] == pytest.approx([51.0, 18.0], abs=1e-6)
    assert b.output_lower == pytest.approx([-34.0], abs=1e-6)
    assert b.output_upper == pytest.approx([102.0], abs=1e-6)


def test_toy_intervals_contain_grid(toy, toy_box):
    b = interval_propagate(toy, toy_box)
    g = np.linspace(0, 10, 1001)
    xs = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    y = evaluate(toy, xs)
    assert y.min() >= -34 and y.max() <= 102


def test_point_box_matches_evaluation(toy):
    x = np.array([2.0, 1.0])
    b = interval_propagate(toy, Box.point(x))
    for k, (pre, post) in enumerate(activations(toy, x)):
        assert np.allclose(b.pre_lower[k], pre) and np.allclose(b.pre_upper[k], pre)
        assert np.allclose(b.post_lower[k], post) and np.allclose(b.post_upper[k], post)


def test_zero_net_interval():
    net = Network((Layer(np.zeros((2, 2)), [0.5, -1.0]), Layer(np.zeros((1, 2)), [3.0], Activation.IDENTITY)))
    b = compute_bounds(net, Box.cube(2, -5, 5))
    assert b.output_lower == pytest.approx([3.0]) and b.output_upper == pytest.approx([3.0])


def test_relu_relaxation_cases():
    ls, li, us, ui = relu_relaxation([1.0, -3.0, -1.0], [4.0, -1.0, 3.0])
    # stable active: identity
    assert (ls[0], li[0], us[0], ui[0]) == (1.0, 0.0, 1.0, 0.0)
    # stable inactive: zero
    assert (ls[1], li[1], us[1], ui[1]) == (0.0, 0.0, 0.0, 0.0)
    # unstable: chord u/(u-l) (x - l)
    assert us[2] == pytest.approx(0.75) and ui[2] == pytest.approx(0.75)


def test_relaxed_within_interval(toy, toy_box):
    ib = interval_propagate(toy, toy_box)
    rb = linear_relax(toy, toy_box, ib)
    assert rb.output_lower[0] >= ib.output_lower[0] and rb.output_upper[0] <= ib.output_upper[0]
    assert rb.output_upper[0] == pytest.approx(102.0, abs=1e-6)


def test_phases_clamp(toy, toy_box):
    b = interval_propagate(toy, toy_box, [np.array([1, -1]), None])
    assert b.post_upper[0][1] == 0.0
    assert b.pre_lower[0][0] >= 0.0


def test_infeasible_phase_flagged(toy, toy_box):
    # v1 = x1 + 4 x2 + 1 >= 1 on the box, so forcing it inactive is infeasible
    assert interval_propagate(toy, toy_box, [np.array([-1, 0]), None]).infeasible


def test_box_validation():
    with pytest.raises(BoxError):
        Box([1.0], [0.0])
    with pytest.raises(BoxError):
        Box([0.0, 0.0], [1.0])
    with pytest.raises(BoxError):
        Box([0.0], [np.inf])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_bounds_are_sound(seed, relax):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    net = random_network(rng, d, list(rng.integers(1, 6, int(rng.integers(1, 4)))))
    c, w = rng.uniform(-2, 2, d), rng.uniform(0, 2, d)
    box = Box(c - w, c + w)
    b = compute_bounds(net, box, relax=relax)
    xs = box.lower + (box.upper - box.lower) * rng.random((300, d))
    xs = np.vstack([xs, box.lower, box.upper])
    for k, (pre, post) in enumerate(activations(net, xs)):
        assert np.all(pre >= b.pre_lower[k] - 1e-7) and np.all(pre <= b.pre_upper[k] + 1e-7)
        assert np.all(post >= b.post_lower[k] - 1e-7) and np.all(post <= b.post_upper[k] + 1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_relaxation_tightens(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 3, [4, 4])
    box = Box.cube(3, -1, 1)
    ib = interval_propagate(net, box)
    rb = linear_relax(net, box, ib)
    for k in range(len(net.layers)):
        assert np.all(rb.pre_lower[k] >= ib.pre_lower[k] - 1e-9)
        assert np.all(rb.pre_upper[k] <= ib.pre_upper[k] + 1e-9)
