"""Disagreement scores and iterative model selection over a PDT table.

Each round scores every surviving model by its mean PDT to the other
survivors, stops when the scores are within ``similarity_delta`` of each
other, and otherwise drops the most disagreeing models according to one of
three filtering criteria.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ArityError(ValueError):
    """An operation needs at least two models."""


class Criterion(str, enum.Enum):
    PERCENTILE = "percentile"
    MAX = "max"
    COMBINED = "combined"


class Termination(str, enum.Enum):
    CONVERGED = "Converged-similar"
    ITERATIONS = "Iterations-exhausted"
    MIN_SURVIVORS = "Min-survivors"


@dataclass
class PdtTable:
    """Symmetric matrix of pairwise PDT values with a zero diagonal.

    ``status`` holds a per-entry status string (e.g. ``"Certified"``) and
    ``names`` optional model labels.
    """

    values: np.ndarray
    status: list[list[str]] | None = None
    names: list[str] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"PDT table must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("PDT table entries must be finite")
        if np.any(v < 0):
            raise ValueError("PDT table entries must be non-negative")
        if np.any(np.diag(v) != 0):
            raise ValueError("PDT table diagonal must be zero")
        if not np.array_equal(v, v.T):
            raise ValueError("PDT table must be symmetric")
        self.values = v
        k = v.shape[0]
        if self.names is None:
            self.names = [str(i) for i in range(k)]
        if len(self.names) != k:
            raise ValueError("one name per model required")
        if self.status is None:
            self.status = [["Certified"] * k for _ in range(k)]

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_pairs(cls, k: int, pairs: dict[tuple[int, int], float], names=None) -> "PdtTable":
        v = np.zeros((k, k))
        for (i, j), d in pairs.items():
            v[i, j] = v[j, i] = d
        return cls(v, names=names)

    def uncertified(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.k) for j in range(i + 1, self.k)
                if self.status[i][j] != "Certified"]

    def to_json(self) -> dict:
        return {"k": self.k, "names": list(self.names), "values": self.values.tolist(),
                "status": [list(r) for r in self.status]}

    @classmethod
    def from_json(cls, obj: dict) -> "PdtTable":
        return cls(np.array(obj["values"], dtype=np.float64), obj.get("status"), obj.get("names"))


@dataclass
class SelectionConfig:
    criterion: Criterion = Criterion.PERCENTILE
    p: float = 25.0
    iterations: int = 10
    similarity_delta: float = 1.0
    min_survivors: int = 2

    def __post_init__(self):
        self.criterion = Criterion(self.criterion)
        if not 0 < self.p < 100:
            raise ValueError("p must lie strictly between 0 and 100")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.similarity_delta < 0:
            raise ValueError("similarity_delta must be non-negative")
        if self.min_survivors < 1:
            raise ValueError("min_survivors must be at least 1")

    def to_json(self) -> dict:
        return {"criterion": self.criterion.value, "p": self.p, "iterations": self.iterations,
                "similarity_delta": self.similarity_delta, "min_survivors": self.min_survivors}


@dataclass
class Iteration:
    survivors: list[int]
    ds: dict[int, float]
    removed: list[int]
    threshold: float | None

    def to_json(self) -> dict:
        return {"survivors": self.survivors, "ds": {str(k): v for k, v in self.ds.items()},
                "removed": self.removed, "threshold": self.threshold}


@dataclass
class SelectionReport:
    iterations: list[Iteration] = field(default_factory=list)
    termination: Termination = Termination.ITERATIONS
    survivors: list[int] = field(default_factory=list)

    @property
    def removed_sets(self) -> list[list[int]]:
        return [it.removed for it in self.iterations if it.removed]

    def to_json(self) -> dict:
        return {"termination": self.termination.value, "survivors": self.survivors,
                "iterations": [it.to_json() for it in self.iterations]}

    def csv_rows(self) -> list[list]:
        """One row per iteration: survivor count and min/median/max DS."""
        rows = [["iteration", "survivors", "ds_min", "ds_median", "ds_max", "removed"]]
        for n, it in enumerate(self.iterations):
            d = np.array(list(it.ds.values()))
            rows.append([n, len(it.survivors), float(d.min()), float(np.median(d)), float(d.max()),
                         " ".join(map(str, it.removed))])
        return rows


def disagreement_score(table: PdtTable, subset: Iterable[int], i: int) -> float:
    """Mean PDT between model ``i`` and the other members of ``subset``."""
    subset = sorted(set(subset))
    if len(subset) < 2:
        raise ArityError("disagreement score needs at least two models")
    if i not in subset:
        raise ValueError(f"model {i} is not in the subset")
    others = [j for j in subset if j != i]
    return float(table.values[i, others].sum() / len(others))


def _descending(ds: dict[int, float]) -> list[int]:
    # higher DS first; among equal scores the higher index first
    return sorted(ds, key=lambda m: (-ds[m], -m))


def _percentile(ds: dict[int, float], p: float) -> tuple[list[int], float]:
    count = max(1, math.ceil(p / 100.0 * len(ds) - 1e-9))
    chosen = _descending(ds)[:count]
    return sorted(chosen), min(ds[m] for m in chosen)


def _max_gap(ds: dict[int, float]) -> tuple[list[int], float]:
    order = _descending(ds)
    scores = [ds[m] for m in order]
    gaps = [scores[i] - scores[i + 1] for i in range(len(scores) - 1)]
    best = max(gaps)
    if best <= 0:
        return [order[0]], scores[0]
    top = gaps.index(best)  # first (highest) gap wins on ties
    threshold = scores[top]
    return sorted(m for m in ds if ds[m] >= threshold), threshold


def filter_step(ds: dict[int, float] | Sequence[float], cfg: SelectionConfig) -> tuple[list[int], float]:
    """Models to remove this round and the DS threshold that selected them.

    ``ds`` maps model index to score (a plain sequence is indexed 0..n-1).
    """
    if not isinstance(ds, dict):
        ds = {i: float(v) for i, v in enumerate(ds)}
    if len(ds) < 2:
        raise ArityError("filtering needs at least two models")
    if cfg.criterion is Criterion.PERCENTILE:
        return _percentile(ds, cfg.p)
    if cfg.criterion is Criterion.MAX:
        return _max_gap(ds)
    by_pct = _percentile(ds, cfg.p)
    by_max = _max_gap(ds)
    return by_max if len(by_max[0]) > len(by_pct[0]) else by_pct


def run_selection(table: PdtTable, cfg: SelectionConfig) -> SelectionReport:
    """Iteratively remove high-disagreement models until the scores agree."""
    if table.k < 2:
        raise ArityError("selection needs at least two models")
    survivors = list(range(table.k))
    report = SelectionReport()
    for _ in range(cfg.iterations):
        ds = {i: disagreement_score(table, survivors, i) for i in survivors}
        if max(ds.values()) - min(ds.values()) <= cfg.similarity_delta:
            report.iterations.append(Iteration(list(survivors), ds, [], None))
            report.termination = Termination.CONVERGED
            break
        removed, threshold = filter_step(ds, cfg)
        room = len(survivors) - cfg.min_survivors
        if room <= 0:
            report.iterations.append(Iteration(list(survivors), ds, [], threshold))
            report.termination = Termination.MIN_SURVIVORS
            break
        if len(removed) > room:
            removed = sorted(_descending({m: ds[m] for m in removed})[:room])
        report.iterations.append(Iteration(list(survivors), ds, removed, threshold))
        survivors = [m for m in survivors if m not in removed]
        if len(survivors) <= cfg.min_survivors:
            report.termination = Termination.MIN_SURVIVORS
            break
    else:
        report.termination = Termination.ITERATIONS
    report.survivors = survivors
    return report


@dataclass
class ClusterAnalysis:
    good_avg: float | None
    bad_avg: float | None
    ratio_percent: float | None

    def to_json(self) -> dict:
        return {"good_avg": self.good_avg, "bad_avg": self.bad_avg,
                "ratio_percent": None if self.ratio_percent is None else round(self.ratio_percent, 1)}


def cluster_ratio(good_avg: float | None, bad_avg: float | None) -> float | None:
    if good_avg is None or bad_avg is None or bad_avg == 0:
        return None
    return 100.0 * good_avg / bad_avg


def cluster_pdt_analysis(table: PdtTable, good: Sequence[bool]) -> ClusterAnalysis:
    """Mean PDT within the good cluster, within the bad cluster, and their ratio.

    A cluster with fewer than two members has no pairs and reports ``None``.
    """
    good = [bool(g) for g in good]
    if len(good) != table.k:
        raise ValueError("one label per model required")

    def mean_within(flag):
        members = [i for i, g in enumerate(good) if g == flag]
        vals = [table.values[i, j] for a, i in enumerate(members) for j in members[a + 1:]]
        return float(np.mean(vals)) if vals else None

    g, b = mean_within(True), mean_within(False)
    return ClusterAnalysis(g, b, cluster_ratio(g, b))
