"""Pairwise disagreement thresholds (PDT) via verification-driven binary search.

The PDT of two scalar-output networks over a domain is the smallest ``alpha``
such that their distance never exceeds ``alpha`` on the domain. It is
bracketed by repeatedly asking the verifier whether some input reaches
distance ``>= alpha``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .bounds import Box, BoxError
from .net import CompositionError, Network, concatenate, evaluate
from .verify import (
    Budget,
    Kind,
    OutputConstraint,
    Query,
    Verdict,
    VerifierUnknown,
    WITNESS_TOL,
    decide,
)


class DistanceKind(str, enum.Enum):
    L1 = "l1"
    CDIST = "cdist"


class Sign(str, enum.Enum):
    POS = "pos"  # y1 - y2 >= alpha
    NEG = "neg"  # y2 - y1 >= alpha


class Condition(str, enum.Enum):
    NONNEG = "c"        # both outputs >= 0
    NONPOS = "c_prime"  # both outputs <= 0


class Status(str, enum.Enum):
    CERTIFIED = "Certified"
    CLAMPED = "Clamped-at-M"
    INFEASIBLE = "Infeasible-constraint"
    UNKNOWN = "Unknown-budget"


@dataclass(frozen=True)
class DistanceSpec:
    kind: DistanceKind = DistanceKind.L1
    conditions: tuple[Condition, ...] = (Condition.NONNEG, Condition.NONPOS)

    @classmethod
    def l1(cls) -> "DistanceSpec":
        return cls(DistanceKind.L1)

    @classmethod
    def cdist(cls) -> "DistanceSpec":
        return cls(DistanceKind.CDIST)

    @classmethod
    def parse(cls, name: str) -> "DistanceSpec":
        return cls(DistanceKind(name))

    def check(self, n1: Network, n2: Network) -> None:
        if n1.output_dim != 1 or n2.output_dim != 1:
            raise ValueError(
                f"{self.kind.value} distance needs scalar outputs, got "
                f"{n1.output_dim} and {n2.output_dim}"
            )
        if n1.input_dim != n2.input_dim:
            raise CompositionError(f"input dims differ: {n1.input_dim} vs {n2.input_dim}")


def condition_holds(cond: Condition | None, y1, y2, tol: float = 0.0) -> np.ndarray:
    y1, y2 = np.asarray(y1), np.asarray(y2)
    if cond is None:
        return np.ones(np.broadcast(y1, y2).shape, dtype=bool)
    if cond is Condition.NONNEG:
        return (y1 >= -tol) & (y2 >= -tol)
    return (y1 <= tol) & (y2 <= tol)


@dataclass(frozen=True, eq=False)
class InputDomain:
    """Union of boxes of a common dimension."""

    boxes: tuple[Box, ...]

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise BoxError("a domain needs at least one box")
        dims = {b.dim for b in boxes}
        if len(dims) != 1:
            raise BoxError(f"boxes have differing dimensions {sorted(dims)}")
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def of(cls, *boxes: Box) -> "InputDomain":
        return cls(tuple(boxes))

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    def to_json(self) -> dict:
        return {"boxes": [b.to_json() for b in self.boxes]}

    @classmethod
    def from_json(cls, obj: dict) -> "InputDomain":
        if "preset" in obj:
            return preset_domain(obj["preset"])
        return cls(tuple(Box.from_json(b) for b in obj["boxes"]))

    @classmethod
    def load(cls, path) -> "InputDomain":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


PRESETS = ("cartpole", "mountain_car", "aurora", "arithmetic")


def preset_domain(name: str) -> InputDomain:
    """Preset OOD input domains for the four benchmark families."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("agreeset").joinpath("data").joinpath(f"{name}.json").read_text()
    return InputDomain.from_json(json.loads(text))


# ------------------------------------------------------------------ queries


def _rows(alpha: float, sign: Sign, cond: Condition | None):
    d = [1.0, -1.0] if sign is Sign.POS else [-1.0, 1.0]
    C, b = [d], [alpha]
    if cond is Condition.NONNEG:
        C += [[1.0, 0.0], [0.0, 1.0]]
        b += [0.0, 0.0]
    elif cond is Condition.NONPOS:
        C += [[-1.0, 0.0], [0.0, -1.0]]
        b += [0.0, 0.0]
    return OutputConstraint(C, b)


def _sign_only(cond: Condition) -> OutputConstraint:
    s = 1.0 if cond is Condition.NONNEG else -1.0
    return OutputConstraint([[s, 0.0], [0.0, s]], [0.0, 0.0])


def encode_query(
    n1: Network,
    n2: Network,
    box: Box,
    spec: DistanceSpec,
    alpha: float,
    sign: Sign,
    condition: Condition | None = None,
    joint: Network | None = None,
) -> Query:
    """One disjunct of ``|N1(x) - N2(x)| >= alpha`` as a verification query.

    For c-distance, ``condition`` selects which sign rows are conjoined
    (defaults to the non-negative one).
    """
    spec.check(n1, n2)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if spec.kind is DistanceKind.CDIST:
        condition = condition or Condition.NONNEG
    else:
        condition = None
    joint = joint or concatenate(n1, n2)
    return Query(joint, box, _rows(alpha, Sign(sign), condition))


@dataclass
class ExistsResult:
    verdict: Verdict
    box_index: int | None = None
    sign: Sign | None = None
    condition: Condition | None = None
    queries: int = 0
    by_condition: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.verdict.sat


def _exists(joint, domain, alpha, cond, budget) -> ExistsResult:
    queries = 0
    nodes = 0
    for i, box in enumerate(domain.boxes):
        for sign in (Sign.POS, Sign.NEG):
            queries += 1
            v = decide(Query(joint, box, _rows(alpha, sign, cond)), budget)
            nodes += v.stats.nodes
            if v.sat:
                v.stats.nodes = nodes
                return ExistsResult(v, i, sign, cond, queries)
    v = Verdict(Kind.UNSAT)
    v.stats.nodes = nodes
    return ExistsResult(v, None, None, cond, queries)


def exists_distance_geq(
    n1: Network,
    n2: Network,
    domain: InputDomain,
    spec: DistanceSpec,
    alpha: float,
    budget: Budget | None = None,
    condition: Condition | None = None,
) -> ExistsResult:
    """Is there an input in the domain at distance ``>= alpha``?

    Stops at the first SAT (box, sign) disjunct. For c-distance without an
    explicit ``condition``, both sign conditions are checked and reported in
    ``by_condition``; the result is SAT if either is.
    Raises :class:`VerifierUnknown` when a disjunct cannot be decided.
    """
    spec.check(n1, n2)
    joint = concatenate(n1, n2)
    if spec.kind is DistanceKind.L1:
        return _exists(joint, domain, alpha, None, budget)
    conds = (condition,) if condition else spec.conditions
    results = {c: _exists(joint, domain, alpha, c, budget) for c in conds}
    sat = [r for r in results.values() if r.sat]
    out = sat[0] if sat else next(iter(results.values()))
    out.by_condition = results
    out.queries = sum(r.queries for r in results.values())
    return out


# ---------------------------------------------------------------------- PDT


@dataclass
class PdtResult:
    lower: float
    upper: float
    status: Status
    witness: np.ndarray | None = None
    queries: int = 0
    trace: list[tuple[float, str]] = field(default_factory=list)
    branches: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        """The scalar PDT used downstream: the certified upper bound."""
        return self.upper

    def to_json(self) -> dict:
        out = {
            "lower": self.lower,
            "upper": self.upper,
            "status": self.status.value,
            "witness": None if self.witness is None else self.witness.tolist(),
            "queries": self.queries,
            "trace": [[a, v] for a, v in self.trace],
        }
        if self.branches:
            out["branches"] = {k.value: r.to_json() for k, r in self.branches.items()}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PdtResult":
        return cls(
            float(obj["lower"]), float(obj["upper"]), Status(obj["status"]),
            None if obj.get("witness") is None else np.asarray(obj["witness"]),
            int(obj.get("queries", 0)), [tuple(t) for t in obj.get("trace", [])],
        )


def distance_at(n1: Network, n2: Network, x, cond: Condition | None = None) -> float:
    """``|N1(x) - N2(x)|``, or -inf where ``cond`` is violated."""
    y1, y2 = float(evaluate(n1, x)[0]), float(evaluate(n2, x)[0])
    if not condition_holds(cond, y1, y2, WITNESS_TOL):
        return -math.inf
    return abs(y1 - y2)


def _search(n1, n2, joint, domain, cond, M, eps, budget) -> PdtResult:
    trace: list[tuple[float, str]] = []
    queries = 0
    witness = None

    def ask(alpha):
        nonlocal queries
        r = _exists(joint, domain, alpha, cond, budget)
        queries += r.queries
        trace.append((alpha, r.verdict.kind.value))
        return r

    try:
        r = ask(M)
    except VerifierUnknown:
        trace.append((M, "UNKNOWN"))
        return PdtResult(0.0, M, Status.UNKNOWN, None, queries + 1, trace)
    if r.sat:
        return PdtResult(M, M, Status.CLAMPED, r.verdict.witness, queries, trace)

    low, high = 0.0, M
    while high - low > eps:
        alpha = 0.5 * (low + high)
        try:
            r = ask(alpha)
        except VerifierUnknown:
            trace.append((alpha, "UNKNOWN"))
            return PdtResult(low, high, Status.UNKNOWN, witness, queries + 1, trace)
        if r.sat:
            witness = r.verdict.witness
            # the witness certifies its own distance, which may exceed alpha
            reached = distance_at(n1, n2, witness, cond)
            low = min(max(alpha, reached), high)
        else:
            high = alpha
    return PdtResult(low, high, Status.CERTIFIED, witness, queries, trace)


def pdt(
    n1: Network,
    n2: Network,
    domain: InputDomain | Box,
    spec: DistanceSpec | None = None,
    M: float = 100.0,
    eps: float = 1.0,
    budget: Budget | None = None,
) -> PdtResult:
    """Certified bracket ``[lower, upper]`` on the PDT of ``n1`` and ``n2``.

    Binary search over ``alpha`` in ``[0, M]``: SAT raises ``lower``, UNSAT
    lowers ``upper``, until they are within ``eps``. If distance ``M`` is
    itself reachable the result is clamped at ``M``. For c-distance the
    search runs once per sign condition and the smaller bracket wins; a
    condition that no input satisfies contributes 0.

    Verifier budget exhaustion stops the search with status
    ``Unknown-budget`` and the bracket certified so far.
    """
    spec = spec or DistanceSpec.l1()
    if isinstance(domain, Box):
        domain = InputDomain.of(domain)
    if not M > 0:
        raise ValueError("M must be positive")
    if not 0 < eps < M:
        raise ValueError("eps must lie in (0, M)")
    spec.check(n1, n2)
    if domain.dim != n1.input_dim:
        raise BoxError(f"domain dimension {domain.dim} != input dim {n1.input_dim}")
    joint = concatenate(n1, n2)
    if spec.kind is DistanceKind.L1:
        return _search(n1, n2, joint, domain, None, M, eps, budget)

    branches: dict[Condition, PdtResult] = {}
    for cond in spec.conditions:
        try:
            feasible = any(
                decide(Query(joint, box, _sign_only(cond)), budget).sat for box in domain.boxes
            )
        except VerifierUnknown:
            branches[cond] = PdtResult(0.0, M, Status.UNKNOWN, queries=1,
                                       trace=[(0.0, "UNKNOWN")])
            continue
        if not feasible:
            branches[cond] = PdtResult(0.0, 0.0, Status.INFEASIBLE, queries=len(domain.boxes))
            continue
        res = _search(n1, n2, joint, domain, cond, M, eps, budget)
        res.queries += len(domain.boxes)
        branches[cond] = res
    return _combine_min(branches)


def _combine_min(branches: dict) -> PdtResult:
    lowest = min(branches.values(), key=lambda r: (r.upper, r.lower))
    lower = min(r.lower for r in branches.values())
    upper = min(r.upper for r in branches.values())
    statuses = {r.status for r in branches.values()}
    if Status.INFEASIBLE in statuses:
        status = Status.INFEASIBLE
    elif Status.UNKNOWN in statuses:
        status = Status.UNKNOWN
    else:
        status = lowest.status
    return PdtResult(
        lower, upper, status, lowest.witness,
        sum(r.queries for r in branches.values()),
        [t for r in branches.values() for t in r.trace],
        dict(branches),
    )


def pdt_multi_region(
    n1: Network,
    n2: Network,
    domain: InputDomain | Sequence[Box],
    spec: DistanceSpec | None = None,
    M: float = 100.0,
    eps: float = 1.0,
    budget: Budget | None = None,
) -> PdtResult:
    """PDT over a union of boxes (one interleaved search over all boxes)."""
    if not isinstance(domain, InputDomain):
        domain = InputDomain(tuple(domain))
    return pdt(n1, n2, domain, spec, M, eps, budget)


def max_queries(M: float, eps: float) -> int:
    """Upper bound on binary-search rounds (plus the initial query at ``M``)."""
    return math.ceil(math.log2(M / eps)) + 1


def iter_pairs(k: int) -> Iterable[tuple[int, int]]:
    for i in range(k):
        for j in range(i + 1, k):
            yield i, j
