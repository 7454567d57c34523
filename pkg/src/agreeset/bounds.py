"""Sound per-neuron bounds over an input box.

Two passes are provided: plain interval arithmetic, and a tighter pass that
relaxes each ReLU by its triangle (``y >= 0``, ``y >= x``, chord above) and
substitutes the relaxation back through one affine layer before
concretizing over the box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .net import Network, ShapeError

SLACK = 1e-9


class BoxError(ValueError):
    """Box with lower > upper, non-finite bounds, or wrong dimension."""


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise BoxError(f"lower has {lo.size} entries, upper has {hi.size}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise BoxError("box bounds must be finite")
        if np.any(lo > hi):
            i = int(np.argmax(lo > hi))
            raise BoxError(f"empty box: lower[{i}]={lo[i]} > upper[{i}]={hi[i]}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int, lo: float, hi: float) -> "Box":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @classmethod
    def point(cls, x) -> "Box":
        return cls(x, x)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.width))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, x) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def to_json(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Box":
        return cls(obj["lower"], obj["upper"])

    def __repr__(self) -> str:
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


@dataclass
class NeuronBounds:
    """Per-layer pre- and post-activation intervals.

    ``infeasible`` is set when phase constraints contradict the bounds, i.e.
    the constrained region is provably empty.
    """

    pre_lower: list[np.ndarray]
    pre_upper: list[np.ndarray]
    post_lower: list[np.ndarray]
    post_upper: list[np.ndarray]
    infeasible: bool = False

    @property
    def output_lower(self) -> np.ndarray:
        return self.post_lower[-1]

    @property
    def output_upper(self) -> np.ndarray:
        return self.post_upper[-1]

    def unstable(self, layer: int) -> np.ndarray:
        return (self.pre_lower[layer] < 0) & (self.pre_upper[layer] > 0)


def _outward(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (
        lo - SLACK * np.maximum(1.0, np.abs(lo)),
        hi + SLACK * np.maximum(1.0, np.abs(hi)),
    )


def _affine_interval(w, b, lo, hi):
    wp = np.maximum(w, 0.0)
    wn = np.minimum(w, 0.0)
    return wp @ lo + wn @ hi + b, wp @ hi + wn @ lo + b


def _check(net: Network, box: Box) -> None:
    if box.dim != net.input_dim:
        raise ShapeError(f"box has dimension {box.dim}, network expects {net.input_dim}")


def _apply_phases(lo, hi, is_relu, phase):
    """Clamp a pre-activation interval by fixed ReLU phases.

    Returns (pre_lo, pre_hi, post_lo, post_hi, contradiction).
    """
    bad = False
    if is_relu and phase is not None:
        act = phase > 0
        ina = phase < 0
        if np.any(act & (hi < 0)) or np.any(ina & (lo > 0)):
            bad = True
        lo = np.where(act, np.maximum(lo, 0.0), lo)
        hi = np.where(ina, np.minimum(hi, 0.0), hi)
    if is_relu:
        post_lo, post_hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
        if phase is not None:
            ina = phase < 0
            post_lo = np.where(ina, 0.0, post_lo)
            post_hi = np.where(ina, 0.0, post_hi)
    else:
        post_lo, post_hi = lo, hi
    return lo, hi, post_lo, post_hi, bad


def interval_propagate(
    net: Network, box: Box, phases: Sequence[np.ndarray | None] | None = None
) -> NeuronBounds:
    """Interval arithmetic through every layer.

    ``phases`` optionally fixes ReLUs per layer (+1 active, -1 inactive,
    0 free); fixed neurons have their pre-activation interval clamped to the
    corresponding half-line.
    """
    _check(net, box)
    lo, hi = box.lower, box.upper
    out = NeuronBounds([], [], [], [])
    for k, layer in enumerate(net.layers):
        plo, phi = _outward(*_affine_interval(layer.weights, layer.bias, lo, hi))
        phase = phases[k] if phases is not None else None
        plo, phi, lo, hi, bad = _apply_phases(plo, phi, layer.is_relu, phase)
        out.pre_lower.append(plo)
        out.pre_upper.append(phi)
        out.post_lower.append(lo)
        out.post_upper.append(hi)
        out.infeasible |= bad
    return out


def relu_relaxation(lo, hi, phase=None):
    """Slopes/intercepts of linear lower and upper bounds of ``relu`` on [lo, hi].

    Returns (lower_slope, lower_icpt, upper_slope, upper_icpt) arrays.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    active = lo >= 0
    inactive = hi <= 0
    if phase is not None:
        active = active | (phase > 0)
        inactive = inactive | (phase < 0)
    unstable = ~active & ~inactive
    span = np.where(unstable, hi - lo, 1.0)
    us = np.where(unstable, hi / span, np.where(active, 1.0, 0.0))
    ui = np.where(unstable, -hi * lo / span, 0.0)
    ls = np.where(unstable, (hi > -lo).astype(np.float64), np.where(active, 1.0, 0.0))
    li = np.zeros_like(lo)
    return ls, li, us, ui


def linear_relax(
    net: Network,
    box: Box,
    bounds: NeuronBounds,
    phases: Sequence[np.ndarray | None] | None = None,
) -> NeuronBounds:
    """Tighten sound ``bounds`` with one-layer triangle back-substitution.

    Every returned interval is contained in the corresponding input interval.
    """
    _check(net, box)
    if bounds.infeasible:
        return bounds
    out = NeuronBounds(
        [bounds.pre_lower[0]], [bounds.pre_upper[0]],
        [bounds.post_lower[0]], [bounds.post_upper[0]],
    )
    layers = net.layers
    for k in range(1, len(layers)):
        layer, prev = layers[k], layers[k - 1]
        w, b = layer.weights, layer.bias
        # interval pass from the (possibly tightened) previous post bounds
        ilo, ihi = _outward(*_affine_interval(w, b, out.post_lower[k - 1], out.post_upper[k - 1]))
        if prev.is_relu:
            phase = phases[k - 1] if phases is not None else None
            ls, li, us, ui = relu_relaxation(out.pre_lower[k - 1], out.pre_upper[k - 1], phase)
            wp, wn = np.maximum(w, 0.0), np.minimum(w, 0.0)
            # upper: positive weights take the chord, negative the lower line
            up_coef = wp * us + wn * ls
            up_const = wp @ ui + wn @ li + b
            lo_coef = wp * ls + wn * us
            lo_const = wp @ li + wn @ ui + b
            # substitute z_{k-1} = W_{k-1} a_{k-2} + b_{k-1}
            src_lo = box.lower if k == 1 else out.post_lower[k - 2]
            src_hi = box.upper if k == 1 else out.post_upper[k - 2]
            pw, pb = prev.weights, prev.bias
            _, bhi = _affine_interval(up_coef @ pw, up_coef @ pb + up_const, src_lo, src_hi)
            blo, _ = _affine_interval(lo_coef @ pw, lo_coef @ pb + lo_const, src_lo, src_hi)
            blo, bhi = _outward(blo, bhi)
            # never looser than the interval pass or the caller's bounds
            plo = np.maximum.reduce([ilo, blo, bounds.pre_lower[k]])
            phi = np.minimum.reduce([ihi, bhi, bounds.pre_upper[k]])
        else:
            plo = np.maximum(ilo, bounds.pre_lower[k])
            phi = np.minimum(ihi, bounds.pre_upper[k])
        phase = phases[k] if phases is not None else None
        if np.any(plo > phi):
            out.infeasible = True
            phi = np.maximum(plo, phi)
        plo, phi, lo, hi, bad = _apply_phases(plo, phi, layer.is_relu, phase)
        out.pre_lower.append(plo)
        out.pre_upper.append(phi)
        out.post_lower.append(lo)
        out.post_upper.append(hi)
        out.infeasible |= bad
    return out


def compute_bounds(net: Network, box: Box, phases=None, relax: bool = True) -> NeuronBounds:
    b = interval_propagate(net, box, phases)
    if relax and not b.infeasible:
        b = linear_relax(net, box, b, phases)
    return b
