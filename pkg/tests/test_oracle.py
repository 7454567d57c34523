import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agreeset.bounds import Box
from agreeset.distance import DistanceSpec, distance_at
from agreeset.net import random_network
from agreeset.oracle import exact_max_distance, grid_max_distance

from conftest import affine, small_pair


def test_toy_pair(toy, doubled, toy_box):
    r = exact_max_distance(toy, doubled, toy_box)
    assert r.value == pytest.approx(102.0)
    assert distance_at(toy, doubled, r.x) == pytest.approx(r.value, abs=1e-9)


def test_toy_grid(toy, doubled, toy_box):
    assert grid_max_distance(toy, doubled, toy_box, resolution=0.01).value >= 101.9


def test_identical(toy, toy_box):
    assert exact_max_distance(toy, toy, toy_box).value == 0.0


def test_affine_pair_is_corner():
    n1, n2 = affine([1.0, -2.0], 0.5), affine([0.5, 1.0], -1.0)
    box = Box([-1.0, 0.0], [2.0, 3.0])
    r = exact_max_distance(n1, n2, box)
    corners = np.array([[a, b] for a in (-1, 2) for b in (0, 3)], dtype=float)
    assert r.regions == 1
    assert r.value == pytest.approx(max(abs(0.5 * x - 3 * y + 1.5) for x, y in corners))


def test_size_and_dim_guards():
    rng = np.random.default_rng(0)
    big = random_network(rng, 2, [9])
    with pytest.raises(ValueError):
        exact_max_distance(big, big, Box.cube(2, 0, 1))
    with pytest.raises(ValueError):
        grid_max_distance(affine([1.0] * 4), affine([0.0] * 4), Box.cube(4, 0, 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1_000_000))
def test_grid_below_exact_and_monotone(seed):
    n1, n2, box = small_pair(np.random.default_rng(seed), max_relus=8, max_dim=2)
    # width 2 on every axis so the 0.1 grid contains the 0.2 grid
    box = Box(box.center - 1.0, box.center + 1.0)
    exact = exact_max_distance(n1, n2, box)
    assert distance_at(n1, n2, exact.x) == pytest.approx(exact.value, abs=1e-9)
    coarse = grid_max_distance(n1, n2, box, resolution=0.2).value
    # halving the spacing keeps every coarse grid point
    fine = grid_max_distance(n1, n2, box, resolution=0.1).value
    for g in (coarse, fine):
        assert g <= exact.value + 1e-9
    assert fine >= coarse - 1e-12


def test_cdist_grid_empty_condition(toy):
    from agreeset.net import Activation, Layer, Network
    up = lambda f: Network(toy.layers[:-1] + (Layer(toy.layers[-1].weights * f, [100.0], Activation.IDENTITY),))
    box = Box.cube(2, 0, 10)
    g = grid_max_distance(up(1), up(2), box, DistanceSpec.cdist(), 0.5)
    e = exact_max_distance(up(1), up(2), box, DistanceSpec.cdist())
    assert g.value == 0.0 and e.value == 0.0
    assert e.by_condition["c_prime"] is None and e.by_condition["c"] == pytest.approx(102.0)
