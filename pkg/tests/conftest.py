import numpy as np
import pytest

from agreeset.bounds import Box
from agreeset.net import Activation, Layer, Network, random_network, scaled_output, toy_network


@pytest.fixture
def toy() -> Network:
    return toy_network()


@pytest.fixture
def doubled() -> Network:
    return scaled_output(toy_network(), 2.0)


@pytest.fixture
def toy_box() -> Box:
    return Box.cube(2, 0.0, 10.0)


def affine(w, b=0.0, name="affine") -> Network:
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    return Network((Layer(w, np.atleast_1d(b), Activation.IDENTITY),), name)


def small_pair(rng: np.random.Generator, max_relus: int = 12, max_dim: int = 3):
    """Two random scalar nets on a shared input space with at most ``max_relus`` ReLUs in total."""
    d = int(rng.integers(1, max_dim + 1))
    h1 = [int(rng.integers(1, 4)) for _ in range(int(rng.integers(1, 3)))]
    h2 = [int(rng.integers(1, 4)) for _ in range(int(rng.integers(1, 3)))]
    while sum(h1) + sum(h2) > max_relus:
        (h1 if sum(h1) >= sum(h2) else h2).pop()
        h1, h2 = h1 or [1], h2 or [1]
    n1 = random_network(rng, d, h1, name="a")
    n2 = random_network(rng, d, h2, name="b")
    c = rng.uniform(-2, 2, d)
    w = rng.uniform(0.2, 2, d)
    return n1, n2, Box(c - w, c + w)


def random_query(rng: np.random.Generator):
    """Random verification query near the SAT/UNSAT boundary (at most 12 ReLUs, at most 4 inputs)."""
    from agreeset.net import evaluate
    from agreeset.verify import OutputConstraint, Query

    d = int(rng.integers(1, 5))
    hidden = [int(h) for h in rng.integers(1, 7, size=rng.integers(1, 4))]
    while sum(hidden) > 12:
        hidden.pop()
    net = random_network(rng, d, hidden, output_dim=int(rng.integers(1, 3)))
    lo = rng.uniform(-2, 1, d)
    box = Box(lo, lo + rng.uniform(0, 3, d))
    ys = evaluate(net, rng.uniform(box.lower, box.upper, size=(200, d)))
    C = rng.normal(size=(int(rng.integers(1, 3)), net.output_dim))
    vals = (ys @ C.T).min(axis=1)
    # threshold around the best sampled value so both verdicts occur
    t = vals.max() + rng.uniform(-0.1, 0.3) * (vals.max() - vals.min() + 1e-3)
    return Query(net, box, OutputConstraint(C, np.full(C.shape[0], t)))


def spike_pair() -> tuple[Network, Network, Box]:
    """A net that is zero except in a sliver at the (10, 10) corner, and the zero net.

    ``n1 = relu(1000 (x1 + x2 - 19.98))`` peaks at 20 on [0, 10]^2; its
    gradient vanishes everywhere outside a region of area 2e-4.
    """
    n1 = Network((Layer([[1000.0, 1000.0]], [-19980.0], Activation.RELU),
                  Layer([[1.0]], [0.0], Activation.IDENTITY)), "spike")
    n2 = Network((Layer([[0.0, 0.0]], [0.0], Activation.RELU),
                  Layer([[0.0]], [0.0], Activation.IDENTITY)), "zero")
    return n1, n2, Box.cube(2, 0.0, 10.0)


# acceptance lines are collected here and printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    print(ACCEPTANCE[criterion])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
