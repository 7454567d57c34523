"""Complete verification of linear output properties of ReLU networks.

A query asks whether some input in a box drives the network output ``y`` to
satisfy every row of ``C y >= b``. :func:`decide` answers it by
branch-and-bound over ReLU phases; :func:`brute_force_decide` enumerates
activation patterns and exists to cross-check it.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lp
from .bounds import Box, BoxError, NeuronBounds, compute_bounds, linear_relax
from .net import Network, ShapeError, evaluate

WITNESS_TOL = 1e-6
LP_TOL = 1e-7
TIGHTEN_SLACK = 1e-6
MAX_BRUTE_FORCE_RELUS = 16


class VerifierUnknown(RuntimeError):
    """The verifier could not decide the query. Never a proof of UNSAT."""

    def __init__(self, message: str, stats: "Stats | None" = None):
        super().__init__(message)
        self.stats = stats


class BudgetExhausted(VerifierUnknown):
    """Node or time budget ran out before the search finished."""


class SizeError(ValueError):
    """Network too large for exhaustive pattern enumeration."""


class Kind(str, enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"


@dataclass(frozen=True, eq=False)
class OutputConstraint:
    """Conjunction of rows ``coeffs[i] . y >= threshold[i]``.

    Strict rows are decided as ``>= threshold + WITNESS_TOL``.
    """

    coeffs: np.ndarray
    threshold: np.ndarray
    strict: bool = False

    def __post_init__(self):
        C = np.array(self.coeffs, dtype=np.float64, ndmin=2)
        b = np.array(self.threshold, dtype=np.float64).reshape(-1)
        if C.shape[0] != b.size:
            raise ValueError(f"{C.shape[0]} coefficient rows but {b.size} thresholds")
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(b))):
            raise ValueError("constraint coefficients must be finite")
        object.__setattr__(self, "coeffs", C)
        object.__setattr__(self, "threshold", b)

    @property
    def effective_threshold(self) -> np.ndarray:
        return self.threshold + (WITNESS_TOL if self.strict else 0.0)

    def slack(self, y) -> np.ndarray:
        """Per-row ``C y - b``; all non-negative means satisfied."""
        return self.coeffs @ np.asarray(y, dtype=np.float64) - self.effective_threshold

    def holds(self, y, tol: float = WITNESS_TOL) -> bool:
        # strict rows already carry their margin, so no extra tolerance
        return bool(np.all(self.slack(y) >= (0.0 if self.strict else -tol)))

    def to_json(self) -> dict:
        return {"coeffs": self.coeffs.tolist(), "threshold": self.threshold.tolist(),
                "strict": self.strict}

    @classmethod
    def from_json(cls, obj: dict) -> "OutputConstraint":
        return cls(obj["coeffs"], obj["threshold"], obj.get("strict", False))


@dataclass(frozen=True, eq=False)
class Query:
    net: Network
    box: Box
    constraint: OutputConstraint

    def __post_init__(self):
        if self.box.dim != self.net.input_dim:
            raise ShapeError(f"box dimension {self.box.dim} != input dim {self.net.input_dim}")
        if self.constraint.coeffs.shape[1] != self.net.output_dim:
            raise ShapeError(
                f"constraint has {self.constraint.coeffs.shape[1]} coefficients, "
                f"network has {self.net.output_dim} outputs"
            )


@dataclass
class Stats:
    nodes: int = 0
    lps: int = 0
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"nodes": self.nodes, "lps": self.lps, "seconds": round(self.seconds, 6)}


@dataclass
class Verdict:
    kind: Kind
    witness: np.ndarray | None = None
    stats: Stats = field(default_factory=Stats)

    @property
    def sat(self) -> bool:
        return self.kind is Kind.SAT

    def to_json(self) -> dict:
        return {
            "verdict": self.kind.value,
            "witness": None if self.witness is None else self.witness.tolist(),
            "stats": self.stats.to_json(),
        }


@dataclass(frozen=True)
class Budget:
    max_nodes: int | None = 200_000
    max_seconds: float | None = None


def _validate(q: Query) -> None:
    if np.any(q.box.lower > q.box.upper):
        raise BoxError("infeasible box")


# ------------------------------------------------------------ LP encoding


class _Encoder:
    """Builds the LP for one node: inputs plus one variable per unstable ReLU.

    Every layer's post-activation is an affine expression ``P v + p`` in the
    LP variables ``v``: stable-active neurons reuse their pre-activation,
    inactive ones are zero and unstable ones get a fresh variable bounded by
    the triangle relaxation.
    """

    def __init__(self, q: Query, phases, bounds: NeuronBounds):
        self.q = q
        net, box = q.net, q.box
        n_in = net.input_dim
        # first pass: count unstable neurons to size the variable vector
        unstable = []
        for k, layer in enumerate(net.layers):
            if not layer.is_relu:
                unstable.append(np.zeros(layer.rows, dtype=bool))
                continue
            lo, hi = bounds.pre_lower[k], bounds.pre_upper[k]
            ph = phases[k]
            unstable.append((ph == 0) & (lo < 0) & (hi > 0))
        n_var = n_in + sum(int(u.sum()) for u in unstable) + 1  # + min-slack t
        rows, rhs = [], []
        lower = np.empty(n_var)
        upper = np.empty(n_var)
        lower[:n_in], upper[:n_in] = box.lower, box.upper

        P = np.zeros((n_in, n_var))
        P[:, :n_in] = np.eye(n_in)
        p = np.zeros(n_in)
        nxt = n_in
        self.pre_exprs = []
        for k, layer in enumerate(net.layers):
            A = layer.weights @ P
            a = layer.weights @ p + layer.bias
            self.pre_exprs.append((A, a))
            if not layer.is_relu:
                P, p = A, a
                continue
            lo, hi, ph = bounds.pre_lower[k], bounds.pre_upper[k], phases[k]
            newP = np.zeros_like(A)
            newp = np.zeros_like(a)
            for j in range(layer.rows):
                if unstable[k][j]:
                    v = nxt
                    nxt += 1
                    lower[v], upper[v] = 0.0, hi[j]
                    # a_j >= pre_j
                    r = A[j].copy()
                    r[v] -= 1.0
                    rows.append(r)
                    rhs.append(-a[j])
                    # a_j <= s (pre_j - lo)
                    s = hi[j] / (hi[j] - lo[j])
                    r = -s * A[j]
                    r[v] += 1.0
                    rows.append(r)
                    rhs.append(s * (a[j] - lo[j]))
                    newP[j, v] = 1.0
                    continue
                active = ph[j] > 0 or (ph[j] == 0 and lo[j] >= 0)
                if ph[j] > 0:
                    rows.append(-A[j])        # pre >= 0
                    rhs.append(a[j])
                elif ph[j] < 0:
                    rows.append(A[j].copy())  # pre <= 0
                    rhs.append(-a[j])
                if active:
                    newP[j] = A[j]
                    newp[j] = a[j]
            P, p = newP, newp
        # output rows: C (P v + p) - b >= t
        C = q.constraint.coeffs
        b = q.constraint.effective_threshold
        CP = C @ P
        for i in range(C.shape[0]):
            r = -CP[i].copy()
            r[-1] += 1.0
            rows.append(r)
            rhs.append(C[i] @ p - b[i])
        lower[-1], upper[-1] = -np.inf, np.inf
        self.A = np.array(rows).reshape(-1, n_var)
        self.b = np.array(rhs)
        self.lower, self.upper = lower, upper
        self.c = np.zeros(n_var)
        self.c[-1] = 1.0
        self.n_in = n_in
        self.n_out_rows = C.shape[0]
        self.n_unstable = n_var - n_in - 1

    def solve(self) -> lp.LPResult:
        return lp.lp_solve(self.c, self.A, self.b, lower=self.lower, upper=self.upper,
                           maximize=True, tol=LP_TOL)


def _tighten(q: Query, phases, bounds: NeuronBounds) -> NeuronBounds:
    """Shrink hidden pre-activation intervals by optimizing over the node's LP.

    For every ReLU layer after the first, each free unstable neuron's
    pre-activation is minimized and maximized over the triangle relaxation
    of the earlier layers together with the node's phase rows. The results
    are widened by a small relative slack and intersected with ``bounds``.
    Later layers are then re-derived from the tightened ones.
    """
    net = q.net
    for k in range(1, len(net.layers)):
        if not net.layers[k].is_relu or bounds.infeasible:
            continue
        lo, hi = bounds.pre_lower[k].copy(), bounds.pre_upper[k].copy()
        free = np.flatnonzero((phases[k] == 0) & (lo < 0) & (hi > 0))
        if free.size == 0:
            continue
        enc = _Encoder(q, phases, bounds)
        m = enc.A.shape[0] - enc.n_out_rows
        try:
            prog = lp.LinearProgram(enc.A.shape[1], enc.A[:m], enc.b[:m],
                                    lower=enc.lower, upper=enc.upper, tol=LP_TOL)
            if not prog.feasible:
                bounds.infeasible = True
                return bounds
            A, a = enc.pre_exprs[k]
            for j in free:
                for maximize in (False, True):
                    r = prog.optimize(A[j], maximize)
                    if r.status != lp.OPTIMAL:
                        continue
                    v = r.value + a[j]
                    pad = TIGHTEN_SLACK * max(1.0, abs(v))
                    if maximize:
                        hi[j] = min(hi[j], v + pad)
                    else:
                        lo[j] = max(lo[j], v - pad)
        except lp.LPError:
            return bounds
        bounds.pre_lower[k], bounds.pre_upper[k] = lo, hi
        if np.any(lo > hi):
            bounds.infeasible = True
            return bounds
        bounds = linear_relax(net, q.box, bounds, phases)
    return bounds


def _empty_phases(net: Network) -> list[np.ndarray]:
    return [np.zeros(layer.rows, dtype=np.int8) for layer in net.layers]


def _check_witness(q: Query, x: np.ndarray) -> np.ndarray | None:
    x = q.box.clip(x)
    if q.constraint.holds(evaluate(q.net, x)):
        return x
    return None


def _intersect(b: NeuronBounds, prior: NeuronBounds | None) -> NeuronBounds:
    if prior is None:
        return b
    for k in range(len(b.pre_lower)):
        b.pre_lower[k] = np.maximum(b.pre_lower[k], prior.pre_lower[k])
        b.pre_upper[k] = np.minimum(b.pre_upper[k], prior.pre_upper[k])
        if np.any(b.pre_lower[k] > b.pre_upper[k]):
            b.infeasible = True
    return b


def decide(
    q: Query,
    budget: Budget | None = None,
    relax: bool = True,
    branching: str = "violation",
    tighten_every: int | None = 8,
) -> Verdict:
    """Decide ``exists x in box: C N(x) >= b``.

    Branch-and-bound on unstable ReLUs: each node computes bounds under its
    fixed phases, solves the triangle-relaxation LP that maximizes the
    smallest constraint slack, and is pruned when that maximum is negative.
    The LP optimum is evaluated concretely as a candidate witness. Otherwise
    an unstable neuron is split: ``branching="violation"`` picks the one whose
    relaxed LP value departs most from its ReLU, weighted by its influence on
    the constraint; ``"widest"`` picks the widest pre-activation interval.

    Every ``tighten_every`` fixed phases (and at the root) the pre-activation
    bounds of layers past the first are re-derived by LP; ``None`` disables it.
    ``relax=False`` skips the back-substitution tightening (interval bounds
    only). Verdicts are unaffected by these options, node counts are not.

    Raises :class:`BudgetExhausted` if the budget runs out and
    :class:`VerifierUnknown` if some node's LP failed numerically.
    """
    _validate(q)
    if branching not in ("widest", "violation"):
        raise ValueError(f"unknown branching rule {branching!r}")
    budget = budget or Budget()
    stats = Stats()
    start = time.perf_counter()
    net = q.net
    numerical_trouble = False

    stack: list[tuple[list[np.ndarray], NeuronBounds | None]] = [(_empty_phases(net), None)]
    while stack:
        if budget.max_nodes is not None and stats.nodes >= budget.max_nodes:
            stats.seconds = time.perf_counter() - start
            raise BudgetExhausted(f"node budget {budget.max_nodes} exhausted", stats)
        if budget.max_seconds is not None and time.perf_counter() - start > budget.max_seconds:
            stats.seconds = time.perf_counter() - start
            raise BudgetExhausted(f"time budget {budget.max_seconds}s exhausted", stats)
        phases, prior = stack.pop()
        stats.nodes += 1

        bounds = compute_bounds(net, q.box, phases, relax=relax)
        bounds = _intersect(bounds, prior)
        if bounds.infeasible:
            continue
        depth = sum(int(np.count_nonzero(p)) for p in phases)
        if relax and tighten_every and depth % tighten_every == 0:
            bounds = _tighten(q, phases, bounds)
            if bounds.infeasible:
                continue
        # output interval already rules the node out
        C = q.constraint.coeffs
        out_hi = np.maximum(C, 0) @ bounds.output_upper + np.minimum(C, 0) @ bounds.output_lower
        if np.any(out_hi < q.constraint.effective_threshold - LP_TOL * np.maximum(1, np.abs(out_hi))):
            continue

        enc = _Encoder(q, phases, bounds)
        stats.lps += 1
        try:
            res = enc.solve()
        except lp.LPError:
            res = None
            numerical_trouble = True
        if res is not None:
            if res.status == lp.INFEASIBLE:
                continue
            t = res.value
            if t < -LP_TOL * max(1.0, float(np.abs(q.constraint.effective_threshold).max())):
                continue
            x = res.x[: enc.n_in]
            w = _check_witness(q, x)
            if w is not None:
                stats.seconds = time.perf_counter() - start
                return Verdict(Kind.SAT, w, stats)
        else:
            x = q.box.center

        best = _choose_split(q, phases, bounds, enc, res, branching)
        if best is None:
            # every ReLU fixed: the LP above was exact
            if res is None:
                continue
            w = _check_witness(q, res.x[: enc.n_in])
            if w is not None:
                stats.seconds = time.perf_counter() - start
                return Verdict(Kind.SAT, w, stats)
            # the exact LP sat within tolerance below the threshold: a
            # concrete slack close to it confirms the node is empty
            y = evaluate(net, q.box.clip(res.x[: enc.n_in]))
            concrete = float(q.constraint.slack(y).min())
            if abs(concrete - res.value) > WITNESS_TOL * max(1.0, float(np.abs(y).max())):
                numerical_trouble = True
            continue
        _, k, j = best
        A, a = enc.pre_exprs[k]
        v = res.x if res is not None else None
        pre_at_opt = (A[j] @ v + a[j]) if v is not None else 0.0
        children = []
        for phase in (1, -1):
            ph = [p.copy() for p in phases]
            ph[k][j] = phase
            children.append(ph)
        # explore the side containing the relaxed optimum first
        first, second = (children[0], children[1]) if pre_at_opt >= 0 else (children[1], children[0])
        stack.append((second, bounds))
        stack.append((first, bounds))

    stats.seconds = time.perf_counter() - start
    if numerical_trouble:
        raise VerifierUnknown("LP numerical failure at some node", stats)
    return Verdict(Kind.UNSAT, None, stats)


def _sensitivity(q: Query, bounds: NeuronBounds) -> list[np.ndarray]:
    """Per layer, a bound on |d(C y) / d post-activation| from absolute weights."""
    net = q.net
    s = np.abs(q.constraint.coeffs).sum(axis=0)
    out = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        out[k] = s
        layer = net.layers[k]
        if layer.is_relu:
            s = s * (bounds.pre_upper[k] > 0)
        s = s @ np.abs(layer.weights)
    return out


def _choose_split(q, phases, bounds, enc, res, branching):
    """Pick the free unstable ReLU to split as (score, layer, index), or None.

    ``"widest"`` takes the widest pre-activation interval. ``"violation"``
    scores each neuron by how far the LP optimum sits above ``relu(pre)``,
    weighted by the neuron's influence on the constrained outputs; neurons
    the LP already handles exactly score by interval width times influence,
    scaled down so violated neurons always come first.
    """
    net = q.net
    sens = _sensitivity(q, bounds) if branching == "violation" else None
    v = res.x if res is not None and res.x is not None else None
    best = None
    var = enc.n_in
    for k, layer in enumerate(net.layers):
        if not layer.is_relu:
            continue
        lo, hi = bounds.pre_lower[k], bounds.pre_upper[k]
        free = (phases[k] == 0) & (lo < 0) & (hi > 0)
        if branching == "widest" or v is None:
            score = np.where(free, hi - lo, -np.inf)
        else:
            A, a = enc.pre_exprs[k]
            pre = A @ v + a
            post = np.zeros(layer.rows)
            # free unstable neurons own consecutive LP variables in index order
            n_free = int(free.sum())
            post[free] = v[var : var + n_free]
            var += n_free
            weight = sens[k]
            gap = np.maximum(post - np.maximum(pre, 0.0), 0.0) * weight
            area = (hi * -lo / np.where(free, hi - lo, 1.0)) * weight
            score = np.where(free, np.where(gap > 1e-9, gap + area.max() + 1.0, 1e-6 * area), -np.inf)
        if not free.any():
            continue
        j = int(np.argmax(score))
        if best is None or score[j] > best[0]:
            best = (score[j], k, j)
    return best


# ------------------------------------------------------- pattern enumeration


def _relu_neurons(net: Network) -> list[tuple[int, int]]:
    return [(k, j) for k, layer in enumerate(net.layers) if layer.is_relu for j in range(layer.rows)]


def enumerate_patterns(net: Network, box: Box, extra_rows=None, objective=None, solver=None):
    """Yield ``(pattern, (W_out, b_out), lp_result)`` for each feasible pattern.

    Neurons are fixed one at a time, layer by layer; a prefix whose phase
    constraints are infeasible on the box is skipped together with all its
    completions. Within a pattern the network is ``W_out x + b_out``.
    ``extra_rows(W_out, b_out)`` returns ``(A, b)`` input-space rows added to
    the leaf LP, ``objective(W_out, b_out)`` the vector it maximizes.
    ``solver(c, A, b)`` defaults to :func:`lp.lp_solve` over the box.
    """
    solve = solver or (lambda c, A, b: lp.lp_solve(c, A, b, lower=box.lower, upper=box.upper))
    n = net.input_dim
    layers = net.layers

    def leaf(W_out, b_out, rows, rhs, pattern):
        A = np.array(rows).reshape(-1, n)
        b = np.array(rhs)
        if extra_rows is not None:
            ea, eb = extra_rows(W_out, b_out)
            A = np.vstack([A, ea])
            b = np.concatenate([b, eb])
        c = objective(W_out, b_out) if objective is not None else np.zeros(n)
        res = solve(c, A, b)
        if res.status == lp.OPTIMAL:
            yield tuple(pattern), (W_out, b_out), res

    def recurse(k, j, A_pre, a_pre, postP, postp, rows, rhs, pattern):
        layer = layers[k]
        if not layer.is_relu:
            if k == len(layers) - 1:
                yield from leaf(A_pre, a_pre, rows, rhs, pattern)
                return
            postP, postp, j = A_pre, a_pre, layer.rows
        if j == layer.rows:
            nxt = layers[k + 1]
            yield from recurse(k + 1, 0, nxt.weights @ postP, nxt.weights @ postp + nxt.bias,
                               np.zeros((nxt.rows, n)), np.zeros(nxt.rows), rows, rhs, pattern)
            return
        for phase in (1, -1):
            # active: -pre <= 0, inactive: pre <= 0
            sgn = -1.0 if phase > 0 else 1.0
            r2 = rows + [sgn * A_pre[j]]
            b2 = rhs + [-sgn * a_pre[j]]
            if solve(np.zeros(n), np.array(r2), np.array(b2)).status == lp.INFEASIBLE:
                continue
            P2, p2 = postP.copy(), postp.copy()
            if phase > 0:
                P2[j], p2[j] = A_pre[j], a_pre[j]
            yield from recurse(k, j + 1, A_pre, a_pre, P2, p2, r2, b2, pattern + [phase])

    first = layers[0]
    yield from recurse(0, 0, first.weights.copy(), first.bias.copy(),
                       np.zeros((first.rows, n)), np.zeros(first.rows), [], [], [])


def brute_force_decide(q: Query) -> Verdict:
    """Decide ``q`` by checking every activation pattern with one LP each.

    Limited to networks with at most 16 ReLUs.
    """
    _validate(q)
    R = q.net.relu_count
    if R > MAX_BRUTE_FORCE_RELUS:
        raise SizeError(f"{R} ReLUs exceeds the brute-force limit of {MAX_BRUTE_FORCE_RELUS}")
    start = time.perf_counter()
    stats = Stats()
    C = q.constraint.coeffs
    b = q.constraint.effective_threshold
    n = q.net.input_dim

    def solver(c, A, rhs):
        stats.lps += 1
        return lp.lp_solve(c, A, rhs, lower=q.box.lower, upper=q.box.upper, tol=LP_TOL)

    def rows(Wout, bout):
        # C (Wout x + bout) >= b  ->  -C Wout x <= C bout - b
        return -C @ Wout, C @ bout - b

    def objective(Wout, bout):
        return (C @ Wout).sum(axis=0)

    for pattern, (Wout, bout), res in enumerate_patterns(q.net, q.box, rows, objective, solver):
        stats.nodes += 1
        w = _check_witness(q, res.x)
        if w is not None:
            stats.seconds = time.perf_counter() - start
            return Verdict(Kind.SAT, w, stats)
    stats.seconds = time.perf_counter() - start
    return Verdict(Kind.UNSAT, None, stats)
