"""Gradient attacks and sampling as cheap lower-bound estimators of the PDT.

Every estimate here is the distance at a concrete input, so it can only
under-approximate the verified maximum. Gradients are computed in reverse
mode with ReLU'(0) = 0; the derivative of ``|d|`` at ``d = 0`` is taken as
+1 so an attack started where the networks agree still moves.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import Box
from .distance import Condition, DistanceKind, DistanceSpec, InputDomain, condition_holds
from .net import Network, ShapeError, activations, evaluate

VIOLATION_TOL = 1e-6
MAX_SUBSETS = 1_000_000


class Variant(str, enum.Enum):
    FGSM = "fgsm"
    PGD = "pgd"
    CONSTRAINED_PGD = "constrained_pgd"


@dataclass
class AttackConfig:
    """Iteration counts and step sizes.

    ``eps_x`` defaults to a fraction of each coordinate's width: one half for
    FGSM (a single step from the centre reaches any corner) and one hundredth
    for the iterative attacks.
    """

    variant: Variant = Variant.PGD
    T: int = 100
    T_x: int = 20
    T_lambda: int = 20
    eps_x: float | np.ndarray | None = None
    eps_lambda: float = 1.0
    use_sign: bool = True
    restarts: int = 0
    seed: int = 0

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if min(self.T, self.T_x, self.T_lambda) < 1:
            raise ValueError("iteration counts must be at least 1")
        if self.eps_x is not None and np.any(np.asarray(self.eps_x) <= 0):
            raise ValueError("eps_x must be positive")
        if self.eps_lambda <= 0:
            raise ValueError("eps_lambda must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")

    def step_x(self, box: Box) -> np.ndarray:
        if self.eps_x is not None:
            return np.broadcast_to(np.asarray(self.eps_x, dtype=np.float64), (box.dim,)).copy()
        frac = 0.5 if self.variant is Variant.FGSM else 0.01
        return frac * box.width

    def to_json(self) -> dict:
        eps = self.eps_x
        if isinstance(eps, np.ndarray):
            eps = eps.tolist()
        return {"variant": self.variant.value, "T": self.T, "T_x": self.T_x,
                "T_lambda": self.T_lambda, "eps_x": eps, "eps_lambda": self.eps_lambda,
                "use_sign": self.use_sign, "restarts": self.restarts, "seed": self.seed}


@dataclass
class AttackResult:
    x: np.ndarray
    objective_value: float
    constraint_violation: float = 0.0
    trace: list[float] = field(default_factory=list)
    failed: bool = False

    def to_json(self) -> dict:
        return {"x": self.x.tolist(), "objective_value": self.objective_value,
                "constraint_violation": self.constraint_violation, "failed": self.failed,
                "trace": self.trace}


def _scalar(*nets: Network) -> None:
    for n in nets:
        if n.output_dim != 1:
            raise ShapeError(f"{n.name}: scalar output required, got {n.output_dim}")


def gradient(net: Network, x) -> np.ndarray:
    """d net(x) / dx for a scalar-output network, by reverse accumulation."""
    _scalar(net)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    acts = activations(net, x)
    g = np.ones(1)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if layer.is_relu:
            g = g * (acts[k][0] > 0)
        g = g @ layer.weights
    return g


def _diff_and_grad(n1, n2, x):
    d = float(evaluate(n1, x)[0] - evaluate(n2, x)[0])
    s = 1.0 if d >= 0 else -1.0
    return abs(d), s * (gradient(n1, x) - gradient(n2, x))


def _step(g: np.ndarray, eps: np.ndarray, use_sign: bool) -> np.ndarray:
    return eps * (np.sign(g) if use_sign else g)


def fgsm(n1: Network, n2: Network, box: Box, cfg: AttackConfig | None = None) -> AttackResult:
    """One signed-gradient step from the box centre, clipped to the box."""
    _scalar(n1, n2)
    cfg = cfg or AttackConfig(Variant.FGSM)
    x0 = box.center
    v0, g = _diff_and_grad(n1, n2, x0)
    x = box.clip(x0 + cfg.step_x(box) * np.sign(g))
    v = abs(float(evaluate(n1, x)[0] - evaluate(n2, x)[0]))
    return AttackResult(x, v, 0.0, [v0, v])


def _starts(box: Box, cfg: AttackConfig) -> list[np.ndarray]:
    starts = [box.center]
    if cfg.restarts:
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        starts += [rng.uniform(box.lower, box.upper) for _ in range(cfg.restarts)]
    return starts


def pgd(
    n1: Network,
    n2: Network,
    box: Box,
    cfg: AttackConfig | None = None,
    direction: str = "max",
) -> AttackResult:
    """Iterated projected gradient ascent (or descent) on ``|n1 - n2|``.

    Returns the best iterate seen over all starts; ``trace`` records the
    objective after every step of every start.
    """
    _scalar(n1, n2)
    if direction not in ("max", "min"):
        raise ValueError("direction must be 'max' or 'min'")
    cfg = cfg or AttackConfig()
    sgn = 1.0 if direction == "max" else -1.0
    eps = cfg.step_x(box)
    best_x, best_v = None, None
    trace = []
    for x in _starts(box, cfg):
        v, g = _diff_and_grad(n1, n2, x)
        if best_v is None or sgn * v > sgn * best_v:
            best_x, best_v = x, v
        for _ in range(cfg.T):
            x = box.clip(x + sgn * _step(g, eps, cfg.use_sign))
            v, g = _diff_and_grad(n1, n2, x)
            trace.append(v)
            if sgn * v > sgn * best_v:
                best_x, best_v = x, v
    return AttackResult(best_x, best_v, 0.0, trace)


@dataclass(frozen=True)
class OutputRow:
    """Linear constraint ``a1 * n1(x) + a2 * n2(x) + c <= 0``."""

    a1: float
    a2: float
    c: float = 0.0


def condition_rows(cond: Condition) -> list[OutputRow]:
    if cond is Condition.NONNEG:
        return [OutputRow(-1.0, 0.0), OutputRow(0.0, -1.0)]
    return [OutputRow(1.0, 0.0), OutputRow(0.0, 1.0)]


def constrained_pgd(
    n1: Network,
    n2: Network,
    box: Box,
    constraints: Sequence[OutputRow],
    cfg: AttackConfig | None = None,
) -> AttackResult:
    """Alternating multiplier / input updates on the penalized objective

        L_C(x, lam) = |n1(x) - n2(x)| - sum_i lam_i * relu(C_i(x)).

    Each outer round restarts the multipliers at 0, takes ``T_lambda``
    projected descent steps in them, then ``T_x`` ascent steps in ``x``. The
    result is the best iterate whose violation is at most ``1e-6``;
    ``failed`` is set when no iterate was feasible.
    """
    _scalar(n1, n2)
    cfg = cfg or AttackConfig(Variant.CONSTRAINED_PGD)
    rows = list(constraints)
    A = np.array([[r.a1, r.a2] for r in rows]).reshape(-1, 2)
    c = np.array([r.c for r in rows])
    eps = cfg.step_x(box)
    best_x, best_v, best_viol = None, -np.inf, np.inf
    fallback = None
    trace = []

    def outputs(x):
        return np.array([evaluate(n1, x)[0], evaluate(n2, x)[0]])

    def consider(x, y):
        nonlocal best_x, best_v, best_viol, fallback
        viol = float(np.max(np.maximum(A @ y + c, 0.0), initial=0.0))
        v = abs(float(y[0] - y[1]))
        if viol <= VIOLATION_TOL:
            if v > best_v:
                best_x, best_v, best_viol = x, v, viol
        elif fallback is None or viol < fallback[2]:
            fallback = (x, v, viol)

    for x in _starts(box, cfg):
        y = outputs(x)
        consider(x, y)
        for _ in range(cfg.T):
            lam = np.zeros(len(rows))
            for _ in range(cfg.T_lambda):
                # d L_C / d lam_i = -relu(C_i(x)); descent pushes lam up
                pen = np.maximum(A @ y + c, 0.0)
                lam = np.maximum(lam + cfg.eps_lambda * (np.sign(pen) if cfg.use_sign else pen), 0.0)
            for _ in range(cfg.T_x):
                g1, g2 = gradient(n1, x), gradient(n2, x)
                s = 1.0 if y[0] - y[1] >= 0 else -1.0
                g = s * (g1 - g2)
                active = (A @ y + c) > 0
                for i in np.flatnonzero(active):
                    g = g - lam[i] * (A[i, 0] * g1 + A[i, 1] * g2)
                x = box.clip(x + _step(g, eps, cfg.use_sign))
                y = outputs(x)
                trace.append(abs(float(y[0] - y[1])))
                consider(x, y)
    if best_x is None:
        x, v, viol = fallback
        return AttackResult(x, v, viol, trace, failed=True)
    return AttackResult(best_x, best_v, best_viol, trace)


def _boxes_of(domain) -> list[Box]:
    return [domain] if isinstance(domain, Box) else list(domain.boxes)


@dataclass
class Estimate:
    """A lower-bound PDT estimate from an attack or from sampling.

    ``failed`` lists conditions for which no admissible point was found;
    such a condition contributes 0 to the minimum over conditions.
    """

    value: float
    x: np.ndarray | None
    method: str
    by_condition: dict[str, float] = field(default_factory=dict)
    failed: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"method": self.method, "value": self.value,
                "x": None if self.x is None else self.x.tolist(),
                "by_condition": self.by_condition, "failed": self.failed}


def _combine(per_cond: dict, method: str) -> Estimate:
    # per_cond: condition -> (value or None, x)
    vals = {c.value: (v if v is not None else 0.0) for c, (v, _) in per_cond.items()}
    failed = [c.value for c, (v, _) in per_cond.items() if v is None]
    cond = min(per_cond, key=lambda c: vals[c.value])
    return Estimate(vals[cond.value], per_cond[cond][1], method, vals, failed)


def attack_pdt(
    n1: Network,
    n2: Network,
    domain: InputDomain | Box,
    spec: DistanceSpec | None = None,
    cfg: AttackConfig | None = None,
) -> Estimate:
    """Best attack value over every box of the domain.

    For the L1 distance the variant in ``cfg`` is used directly; for the
    c-distance each sign condition is attacked with the constrained PGD and
    the smaller of the two maxima is reported.
    """
    spec = spec or DistanceSpec.l1()
    cfg = cfg or AttackConfig()
    spec.check(n1, n2)
    boxes = _boxes_of(domain)
    if spec.kind is DistanceKind.L1:
        best = None
        for box in boxes:
            if cfg.variant is Variant.FGSM:
                r = fgsm(n1, n2, box, cfg)
            elif cfg.variant is Variant.PGD:
                r = pgd(n1, n2, box, cfg)
            else:
                r = constrained_pgd(n1, n2, box, [], cfg)
            if best is None or r.objective_value > best.objective_value:
                best = r
        return Estimate(best.objective_value, best.x, cfg.variant.value)
    per_cond = {}
    for cond in spec.conditions:
        best_v, best_x = None, None
        for box in boxes:
            r = constrained_pgd(n1, n2, box, condition_rows(cond), cfg)
            if not r.failed and (best_v is None or r.objective_value > best_v):
                best_v, best_x = r.objective_value, r.x
        per_cond[cond] = (best_v, best_x)
    return _combine(per_cond, Variant.CONSTRAINED_PGD.value)


def sample_points(domain: InputDomain | Box, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform points from a union of boxes, boxes picked by volume."""
    boxes = _boxes_of(domain)
    vols = np.array([b.volume for b in boxes])
    if vols.sum() > 0:
        probs = vols / vols.sum()
    else:
        probs = np.full(len(boxes), 1.0 / len(boxes))
    which = rng.choice(len(boxes), size=n, p=probs)
    lo = np.stack([boxes[i].lower for i in which])
    hi = np.stack([boxes[i].upper for i in which])
    return lo + (hi - lo) * rng.random((n, lo.shape[1]))


def sample_pdt(
    n1: Network,
    n2: Network,
    domain: InputDomain | Box,
    spec: DistanceSpec | None = None,
    n_samples: int = 1000,
    seed: int = 0,
) -> Estimate:
    """Largest distance observed on uniform random inputs.

    For the c-distance each condition keeps only the samples satisfying it;
    a condition that no sample satisfies is listed in ``failed``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    spec = spec or DistanceSpec.l1()
    spec.check(n1, n2)
    rng = np.random.Generator(np.random.Philox(seed))
    x = sample_points(domain, n_samples, rng)
    y1, y2 = evaluate(n1, x)[:, 0], evaluate(n2, x)[:, 0]
    d = np.abs(y1 - y2)
    if spec.kind is DistanceKind.L1:
        i = int(np.argmax(d))
        return Estimate(float(d[i]), x[i], "sample")
    per_cond = {}
    for cond in spec.conditions:
        ok = condition_holds(cond, y1, y2)
        if not ok.any():
            per_cond[cond] = (None, None)
            continue
        i = int(np.argmax(np.where(ok, d, -np.inf)))
        per_cond[cond] = (float(d[i]), x[i])
    return _combine(per_cond, "sample")


@dataclass
class RankedSubset:
    members: tuple[int, ...]
    mean_variance: float


def ensemble_variance_rank(
    nets: Sequence[Network],
    k: int,
    domain: InputDomain | Box,
    n_samples: int = 1000,
    seed: int = 0,
) -> list[RankedSubset]:
    """All ``k``-subsets ordered by mean output variance (lowest first).

    The variance is the population variance of the members' outputs at a
    sample, averaged over shared uniform samples from ``domain``.
    """
    n = len(nets)
    if not 1 <= k <= n:
        raise ValueError(f"subset size must be in [1, {n}]")
    if math.comb(n, k) > MAX_SUBSETS:
        raise ValueError(f"{math.comb(n, k)} subsets exceed the limit of {MAX_SUBSETS}")
    _scalar(*nets)
    rng = np.random.Generator(np.random.Philox(seed))
    x = sample_points(domain, n_samples, rng)
    Y = np.stack([evaluate(net, x)[:, 0] for net in nets])  # (n, samples)
    ranked = []
    for subset in itertools.combinations(range(n), k):
        v = Y[list(subset)].var(axis=0).mean()
        ranked.append(RankedSubset(subset, float(v)))
    ranked.sort(key=lambda r: (r.mean_variance, r.members))
    return ranked
