import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agreeset.attack import (
    AttackConfig,
    OutputRow,
    Variant,
    attack_pdt,
    condition_rows,
    constrained_pgd,
    ensemble_variance_rank,
    fgsm,
    gradient,
    pgd,
    sample_pdt,
)
from agreeset.bounds import Box, interval_propagate
from agreeset.distance import Condition, DistanceSpec, pdt
from agreeset.net import Activation, Layer, Network, evaluate, random_network
from agreeset.oracle import exact_max_distance

from conftest import affine, small_pair, spike_pair


def test_gradient_affine():
    net = affine([1.5, -2.0, 0.5], 3.0)
    for x in np.random.default_rng(0).normal(size=(5, 3)):
        assert gradient(net, x).tolist() == [1.5, -2.0, 0.5]


def test_gradient_toy(toy):
    assert gradient(toy, [2.0, 1.0]).tolist() == [2.0, 8.0]
    h = 1e-5
    fd = [(evaluate(toy, [2 + h, 1])[0] - evaluate(toy, [2 - h, 1])[0]) / (2 * h),
          (evaluate(toy, [2, 1 + h])[0] - evaluate(toy, [2, 1 - h])[0]) / (2 * h)]
    assert fd == pytest.approx([2.0, 8.0], abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 1_000_000))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    net = random_network(rng, d, list(rng.integers(1, 6, int(rng.integers(1, 3)))))
    x = rng.normal(size=d)
    h = 1e-5
    fd = np.array([(evaluate(net, x + h * e)[0] - evaluate(net, x - h * e)[0]) / (2 * h) for e in np.eye(d)])
    g = gradient(net, x)
    # skip points within h of a kink, where the two disagree legitimately
    from agreeset.net import activations
    if any(np.min(np.abs(pre)) < 1e-3 for pre, _ in activations(net, x)[:-1]):
        return
    assert g == pytest.approx(fd, rel=1e-4, abs=1e-4)


def test_fgsm_linear_corner():
    n1, n2 = affine([1.0, -1.0]), affine([0.0, 0.0])
    r = fgsm(n1, n2, Box.cube(2, -1, 1), AttackConfig(Variant.FGSM, eps_x=1.0))
    assert r.x.tolist() == [1.0, -1.0] and r.objective_value == 2.0


def test_identical_nets_zero(toy, toy_box):
    assert pgd(toy, toy, toy_box).objective_value == 0.0
    assert attack_pdt(toy, toy, toy_box).value == 0.0
    assert sample_pdt(toy, toy, toy_box).value == 0.0


def test_projection_keeps_box(toy, doubled, toy_box):
    r = fgsm(toy, doubled, toy_box, AttackConfig(Variant.FGSM, eps_x=100.0))
    assert toy_box.contains(r.x)
    r = pgd(toy, doubled, toy_box, AttackConfig(eps_x=100.0, T=3))
    assert toy_box.contains(r.x)


def test_pgd_linear_reaches_corner():
    n1, n2 = affine([2.0, 1.0]), affine([0.0, 0.0])
    box = Box.cube(2, 0, 4)
    cfg = AttackConfig(eps_x=0.5, T=int(np.ceil(2 / 0.5)))  # from the centre, half the width away
    r = pgd(n1, n2, box, cfg)
    assert r.x.tolist() == [4.0, 4.0] and r.objective_value == 12.0


def test_pgd_dominates_fgsm(toy, doubled, toy_box):
    eps = 0.5 * toy_box.width
    f = fgsm(toy, doubled, toy_box, AttackConfig(Variant.FGSM, eps_x=eps))
    p = pgd(toy, doubled, toy_box, AttackConfig(eps_x=eps, T=5))
    assert p.objective_value >= f.objective_value


def test_pgd_below_verified(toy, doubled, toy_box):
    r = pgd(toy, doubled, toy_box)
    ver = pdt(toy, doubled, toy_box, M=200, eps=1)
    assert r.objective_value <= ver.upper + 1e-6
    assert r.objective_value == pytest.approx(102.0)


def test_pgd_direction_and_restarts(toy, doubled, toy_box):
    lo = pgd(toy, doubled, toy_box, AttackConfig(restarts=3, seed=4), direction="min")
    assert lo.objective_value <= pgd(toy, doubled, toy_box).objective_value
    with pytest.raises(ValueError):
        pgd(toy, doubled, toy_box, direction="sideways")


def test_constrained_without_rows_is_unconstrained(toy, doubled, toy_box):
    r = constrained_pgd(toy, doubled, toy_box, [], AttackConfig(Variant.CONSTRAINED_PGD, T=5))
    assert not r.failed and r.constraint_violation == 0.0


def test_constrained_failure_flag(toy):
    shifted = lambda f: Network(toy.layers[:-1] + (Layer(toy.layers[-1].weights * f, [100.0], Activation.IDENTITY),))
    a, b = shifted(1.0), shifted(2.0)
    box = Box.cube(2, 0, 10)
    # interval bounds already show both outputs stay positive
    assert interval_propagate(a, box).output_lower[0] > 0
    assert interval_propagate(b, box).output_lower[0] > 0
    r = constrained_pgd(a, b, box, condition_rows(Condition.NONPOS), AttackConfig(Variant.CONSTRAINED_PGD, T=5))
    assert r.failed and r.constraint_violation > 0
    est = attack_pdt(a, b, box, DistanceSpec.cdist(), AttackConfig(Variant.CONSTRAINED_PGD, T=5))
    assert est.failed == [Condition.NONPOS.value] and est.value == 0.0


def test_constrained_respects_rows():
    # maximize |x| with x <= 0.5 imposed through n1's output
    n1, n2 = affine([1.0]), affine([0.0])
    r = constrained_pgd(n1, n2, Box([-0.2], [2.0]), [OutputRow(1.0, 0.0, -0.5)],
                        AttackConfig(Variant.CONSTRAINED_PGD, eps_x=0.05, T=20))
    assert not r.failed and r.x[0] <= 0.5 + 1e-6 and r.objective_value == pytest.approx(0.5)


def test_sample_point_box(toy, doubled):
    box = Box.point([2.0, 1.0])
    assert sample_pdt(toy, doubled, box, n_samples=10).value == 14.0


def test_sample_deterministic(toy, doubled, toy_box):
    a = sample_pdt(toy, doubled, toy_box, n_samples=200, seed=5)
    b = sample_pdt(toy, doubled, toy_box, n_samples=200, seed=5)
    assert a.value == b.value and np.array_equal(a.x, b.x)


def test_spike_missed_by_estimators():
    n1, n2, box = spike_pair()
    truth = exact_max_distance(n1, n2, box).value
    assert truth == pytest.approx(20.0)
    assert attack_pdt(n1, n2, box).value < truth - 1
    assert sample_pdt(n1, n2, box, n_samples=1000).value < truth - 1
    ver = pdt(n1, n2, box, M=64, eps=0.5)
    assert ver.lower <= truth <= ver.upper


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1_000_000))
def test_estimates_below_exact(seed):
    n1, n2, box = small_pair(np.random.default_rng(seed), max_relus=8)
    truth = exact_max_distance(n1, n2, box).value
    assert attack_pdt(n1, n2, box).value <= truth + 1e-6
    assert attack_pdt(n1, n2, box, cfg=AttackConfig(Variant.FGSM)).value <= truth + 1e-6
    assert sample_pdt(n1, n2, box, n_samples=300, seed=seed).value <= truth + 1e-6


def test_variance_rank_counts_and_order():
    rng = np.random.default_rng(0)
    base = random_network(rng, 2, [3])
    nets = [base] * 15 + [Network(base.layers[:-1] + (Layer(base.layers[-1].weights, base.layers[-1].bias + 50, Activation.IDENTITY),))]
    ranked = ensemble_variance_rank(nets, 3, Box.cube(2, -1, 1), n_samples=50)
    assert len(ranked) == 560
    assert ranked[0].mean_variance == 0.0
    assert all(15 in r.members for r in ranked if r.mean_variance > 0)
    assert max(r.mean_variance for r in ranked if 15 not in r.members) < min(r.mean_variance for r in ranked if 15 in r.members)


def test_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(T=0)
    with pytest.raises(ValueError):
        AttackConfig(eps_lambda=0)
    with pytest.raises(ValueError):
        AttackConfig(eps_x=-1.0)
