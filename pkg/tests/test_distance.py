import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agreeset.bounds import Box
from agreeset.distance import (
    Condition,
    DistanceSpec,
    InputDomain,
    Sign,
    Status,
    encode_query,
    exists_distance_geq,
    iter_pairs,
    max_queries,
    pdt,
    pdt_multi_region,
    preset_domain,
)
from agreeset.net import Activation, Layer, Network, evaluate
from agreeset.oracle import exact_max_distance
from agreeset.verify import Budget

from conftest import affine, small_pair

L1 = DistanceSpec.l1()


def test_encoding_l1(toy, doubled, toy_box):
    q = encode_query(toy, doubled, toy_box, L1, 0.0, Sign.POS)
    assert q.constraint.coeffs.tolist() == [[1.0, -1.0]] and q.constraint.threshold.tolist() == [0.0]


def test_encoding_cdist(toy, doubled, toy_box):
    q = encode_query(toy, doubled, toy_box, DistanceSpec.cdist(), 1.0, Sign.POS, Condition.NONNEG)
    assert q.constraint.coeffs.tolist() == [[1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
    assert q.constraint.threshold.tolist() == [1.0, 0.0, 0.0]


def test_encoding_rejects_vector_outputs(toy, toy_box):
    wide = Network((Layer(np.eye(2), np.zeros(2), Activation.IDENTITY),))
    with pytest.raises(ValueError):
        encode_query(wide, wide, toy_box, L1, 1.0, Sign.POS)


def test_exists_examples(toy, doubled, toy_box):
    dom = InputDomain.of(toy_box)
    assert exists_distance_geq(toy, doubled, dom, L1, 0.0).sat
    assert exists_distance_geq(toy, doubled, dom, L1, 90.0).sat
    r = exists_distance_geq(toy, doubled, dom, L1, 102.0)
    assert r.sat and abs(evaluate(toy, r.verdict.witness)[0] - evaluate(doubled, r.verdict.witness)[0]) >= 102 - 1e-6
    assert not exists_distance_geq(toy, doubled, dom, L1, 103.0).sat
    assert not exists_distance_geq(toy, toy, dom, L1, 0.5).sat


def test_pdt_toy_pair(toy, doubled, toy_box):
    r = pdt(toy, doubled, toy_box, L1, M=200, eps=1)
    assert r.status is Status.CERTIFIED
    assert r.lower <= 102 <= r.upper and r.upper - r.lower <= 1
    assert len(r.trace) <= max_queries(200, 1)


def test_pdt_clamped(toy, doubled, toy_box):
    r = pdt(toy, doubled, toy_box, L1, M=50, eps=1)
    assert r.status is Status.CLAMPED and r.lower == 50 and r.upper == 50


def test_pdt_self(toy):
    r = pdt(toy, toy, Box.cube(2, -5, 5), L1, M=10, eps=0.5)
    assert r.lower == 0 and r.upper <= 0.5 and r.status is Status.CERTIFIED


def test_pdt_unknown_budget(toy, doubled, toy_box):
    r = pdt(toy, doubled, toy_box, L1, M=200, eps=1, budget=Budget(max_nodes=0))
    assert r.status is Status.UNKNOWN and r.lower == 0 and r.upper == 200


def test_pdt_argument_checks(toy, doubled, toy_box):
    with pytest.raises(ValueError):
        pdt(toy, doubled, toy_box, L1, M=0, eps=1)
    with pytest.raises(ValueError):
        pdt(toy, doubled, toy_box, L1, M=10, eps=10)
    with pytest.raises(ValueError):
        pdt(toy, doubled, Box.cube(3, 0, 1), L1, M=10, eps=1)


def test_multi_region(toy, doubled, toy_box):
    single = pdt(toy, doubled, toy_box, L1, M=200, eps=1)
    twice = pdt_multi_region(toy, doubled, [toy_box, toy_box], L1, M=200, eps=1)
    nested = pdt_multi_region(toy, doubled, [Box.cube(2, 0, 1), toy_box], L1, M=200, eps=1)
    assert (twice.lower, twice.upper) == (single.lower, single.upper)
    assert nested.lower <= 102 <= nested.upper


def test_multi_region_disjoint():
    # |x| peaks at the far end of the right-hand box only
    n1, n2 = affine([1.0]), affine([0.0])
    left, right = Box([-1.0], [0.0]), Box([5.0], [7.0])
    r = pdt_multi_region(n1, n2, [left, right], L1, M=20, eps=0.25)
    alone = pdt(n1, n2, right, L1, M=20, eps=0.25)
    assert r.lower <= 7 <= r.upper and (r.lower, r.upper) == (alone.lower, alone.upper)


def test_cdist_infeasible_branch(toy):
    # outputs 100 + toy and 100 + 2 toy stay positive on the box, so c' is empty
    shift = lambda net, f: Network(net.layers[:-1] + (Layer(net.layers[-1].weights * f, [100.0], Activation.IDENTITY),))
    a, b = shift(toy, 1.0), shift(toy, 2.0)
    r = pdt(a, b, Box.cube(2, 0, 10), DistanceSpec.cdist(), M=200, eps=1)
    assert r.status is Status.INFEASIBLE
    assert r.branches[Condition.NONPOS].status is Status.INFEASIBLE
    assert r.upper == 0.0
    nonneg = r.branches[Condition.NONNEG]
    assert nonneg.lower <= 102 <= nonneg.upper


def test_cdist_min_over_conditions():
    # y1 = x, y2 = 2x: both non-negative for x >= 0, both non-positive for x <= 0
    n1, n2 = affine([1.0]), affine([2.0])
    r = pdt(n1, n2, Box([-3.0], [1.0]), DistanceSpec.cdist(), M=20, eps=0.1)
    # non-negative side: x in [0,1], distance x <= 1; non-positive side: x in [-3,0], distance 3
    assert r.lower <= 1 <= r.upper and r.upper - r.lower <= 0.1


def test_pdt_json_roundtrip(toy, doubled, toy_box):
    from agreeset.distance import PdtResult
    r = pdt(toy, doubled, toy_box, L1, M=200, eps=1)
    again = PdtResult.from_json(r.to_json())
    assert (again.lower, again.upper, again.status) == (r.lower, r.upper, r.status)


def test_presets():
    cart = preset_domain("cartpole")
    assert len(cart.boxes) == 2
    arith = preset_domain("arithmetic")
    assert arith.dim == 10 and arith.boxes[0].lower.tolist() == [-1000.0] * 10
    assert preset_domain("aurora").dim == 30
    with pytest.raises(KeyError):
        preset_domain("pong")


def test_iter_pairs():
    assert list(iter_pairs(3)) == [(0, 1), (0, 2), (1, 2)]
    assert len(list(iter_pairs(10))) == 45


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1_000_000))
def test_pdt_brackets_oracle(seed):
    n1, n2, box = small_pair(np.random.default_rng(seed), max_relus=8)
    truth = exact_max_distance(n1, n2, box).value
    r = pdt(n1, n2, box, L1, M=max(4 * truth, 1.0) + 1, eps=0.25)
    assert r.status is Status.CERTIFIED
    assert r.lower - 1e-6 <= truth <= r.upper + 1e-6 and r.upper - r.lower <= 0.25


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1_000_000))
def test_pdt_monotone_in_box(seed):
    n1, n2, box = small_pair(np.random.default_rng(seed), max_relus=8)
    inner = Box(box.center - 0.25 * box.width, box.center + 0.25 * box.width)
    outer = pdt(n1, n2, box, L1, M=100, eps=0.5)
    small = pdt(n1, n2, inner, L1, M=100, eps=0.5)
    assert small.lower <= outer.upper + 1e-9
