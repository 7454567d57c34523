"""Slow reference answers for cross-checking the verifier and the PDT search.

:func:`exact_max_distance` splits the input box into the linear regions of
both networks and solves one LP per region with scipy's HiGHS solver, so it
shares no code with the in-repo simplex or branch-and-bound. It is only
practical for a handful of ReLUs. :func:`grid_max_distance` evaluates a
dense grid and gives a lower bound for inputs of dimension at most 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.optimize import linprog

from .bounds import Box
from .distance import Condition, DistanceKind, DistanceSpec, InputDomain
from .net import Network

MAX_ORACLE_RELUS = 16
MAX_GRID_DIM = 3


@dataclass
class OracleResult:
    value: float
    x: np.ndarray | None
    regions: int
    by_condition: dict[str, float | None] | None = None

    def to_json(self) -> dict:
        return {"value": self.value, "x": None if self.x is None else self.x.tolist(),
                "regions": self.regions, "by_condition": self.by_condition}


def _feasible(G, h, box: Box) -> bool:
    if not G:
        return True
    n = box.dim
    r = linprog(np.zeros(n), A_ub=np.array(G), b_ub=np.array(h),
                bounds=list(zip(box.lower, box.upper)), method="highs")
    return r.status == 0


def _regions(net: Network, box: Box, G0, h0) -> Iterator[tuple[list, list, np.ndarray, np.ndarray]]:
    """Yield (G, h, A, c): on ``{x in box : G x <= h}`` the output is ``A x + c``."""
    n = box.dim
    layers = net.layers

    def walk(k, j, P, p, G, h, mask):
        # P, p: affine map from x to the input of layer k
        W, b = layers[k].weights, layers[k].bias
        if not layers[k].is_relu:
            yield G, h, W @ P, W @ p + b
            return
        if j == W.shape[0]:
            m = np.array(mask, dtype=np.float64)
            yield from walk(k + 1, 0, (W @ P) * m[:, None], (W @ p + b) * m, G, h, [])
            return
        row, const = W[j] @ P, W[j] @ p + b[j]
        for active in (True, False):
            # active: pre >= 0  ->  -row x <= const ; inactive: row x <= -const
            g, hh = (-row, const) if active else (row, -const)
            G2, h2 = G + [g], h + [hh]
            if _feasible(G2, h2, box):
                yield from walk(k, j + 1, P, p, G2, h2, mask + [active])

    yield from walk(0, 0, np.eye(n), np.zeros(n), list(G0), list(h0), [])


def _max_linear(obj, const, G, h, box: Box):
    r = linprog(-obj, A_ub=np.array(G) if G else None, b_ub=np.array(h) if h else None,
                bounds=list(zip(box.lower, box.upper)), method="highs")
    if r.status != 0:
        return None, None
    return float(obj @ r.x + const), r.x


def _condition_rows(cond, A1, c1, A2, c2):
    if cond is None:
        return [], []
    if cond is Condition.NONNEG:
        return [-A1, -A2], [c1, c2]
    return [A1, A2], [-c1, -c2]


def _max_on_box(n1, n2, box: Box, cond) -> tuple[float | None, np.ndarray | None, int]:
    best, best_x, count = None, None, 0
    for G1, h1, A1, c1 in _regions(n1, box, [], []):
        for G, h, A2, c2 in _regions(n2, box, G1, h1):
            count += 1
            a1, a2 = A1[0], A2[0]
            b1, b2 = float(c1[0]), float(c2[0])
            rows, rhs = _condition_rows(cond, a1, b1, a2, b2)
            for s in (1.0, -1.0):
                v, x = _max_linear(s * (a1 - a2), s * (b1 - b2), G + rows, h + rhs, box)
                if v is not None and (best is None or v > best):
                    best, best_x = v, x
    return best, best_x, count


def _check(n1: Network, n2: Network) -> None:
    total = n1.relu_count + n2.relu_count
    if total > MAX_ORACLE_RELUS:
        raise ValueError(f"oracle limited to {MAX_ORACLE_RELUS} ReLUs, pair has {total}")
    if n1.output_dim != 1 or n2.output_dim != 1 or n1.input_dim != n2.input_dim:
        raise ValueError("oracle needs two scalar networks on the same input space")


def exact_max_distance(
    n1: Network,
    n2: Network,
    domain: InputDomain | Box,
    spec: DistanceSpec | None = None,
) -> OracleResult:
    """Exact ``max |n1(x) - n2(x)|`` over the domain.

    For the c-distance the maximum is taken separately under each sign
    condition (an empty condition region counts as 0) and the minimum of the
    two is returned.
    """
    spec = spec or DistanceSpec.l1()
    _check(n1, n2)
    boxes = [domain] if isinstance(domain, Box) else list(domain.boxes)
    conds = [None] if spec.kind is DistanceKind.L1 else list(spec.conditions)
    per, regions = {}, 0
    for cond in conds:
        best, best_x = None, None
        for box in boxes:
            v, x, n = _max_on_box(n1, n2, box, cond)
            regions += n
            if v is not None and (best is None or v > best):
                best, best_x = v, x
        per[cond] = (best, best_x)
    if spec.kind is DistanceKind.L1:
        v, x = per[None]
        return OracleResult(max(v, 0.0), x, regions)
    vals = {c: (v if v is not None else 0.0) for c, (v, _) in per.items()}
    cond = min(vals, key=vals.get)
    return OracleResult(vals[cond], per[cond][1], regions,
                        {c.value: per[c][0] for c in per})


def _forward(net: Network, x: np.ndarray) -> np.ndarray:
    for layer in net.layers:
        x = x @ np.asarray(layer.weights).T + np.asarray(layer.bias)
        if layer.is_relu:
            x = np.maximum(x, 0.0)
    return x


def grid_max_distance(
    n1: Network,
    n2: Network,
    box: Box,
    spec: DistanceSpec | None = None,
    resolution: float = 0.05,
) -> OracleResult:
    """Largest distance on a grid with spacing at most ``resolution``.

    The grid includes both ends of every axis; the result is a lower bound on
    the true maximum.
    """
    spec = spec or DistanceSpec.l1()
    if box.dim > MAX_GRID_DIM:
        raise ValueError(f"grid oracle limited to {MAX_GRID_DIM} input dimensions")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    counts = [int(np.ceil(w / resolution - 1e-9)) + 1 for w in box.width]
    axes = [np.linspace(lo, hi, c) for lo, hi, c in zip(box.lower, box.upper, counts)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    y1, y2 = _forward(n1, pts)[:, 0], _forward(n2, pts)[:, 0]
    d = np.abs(y1 - y2)
    if spec.kind is DistanceKind.L1:
        i = int(np.argmax(d))
        return OracleResult(float(d[i]), pts[i], pts.shape[0])
    vals, xs = {}, {}
    for cond in spec.conditions:
        ok = (y1 >= 0) & (y2 >= 0) if cond is Condition.NONNEG else (y1 <= 0) & (y2 <= 0)
        if ok.any():
            i = int(np.argmax(np.where(ok, d, -np.inf)))
            vals[cond], xs[cond] = float(d[i]), pts[i]
        else:
            vals[cond], xs[cond] = 0.0, None
    cond = min(vals, key=vals.get)
    return OracleResult(vals[cond], xs[cond], pts.shape[0], {c.value: v for c, v in vals.items()})
