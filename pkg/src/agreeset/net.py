"""Feed-forward ReLU networks: evaluation, side-by-side composition and the
``.ffnt`` text format."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"


class ShapeError(ValueError):
    """Input vector does not match the network's input dimension."""


class CompositionError(ValueError):
    """Two networks cannot be composed side by side."""


class ParseError(ValueError):
    """Malformed ``.ffnt`` content."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, ndmin=2)
        b = np.array(self.bias, dtype=np.float64).reshape(-1)
        if w.shape[0] != b.shape[0]:
            raise ValueError(f"bias length {b.shape[0]} != weight rows {w.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("weights and biases must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def is_relu(self) -> bool:
        return self.activation is Activation.RELU


@dataclass(frozen=True, eq=False)
class Network:
    """An immutable stack of affine layers, each optionally followed by ReLU.

    The final layer must be linear (``Activation.IDENTITY``).
    """

    layers: tuple[Layer, ...]
    name: str = "net"
    input_dim: int = field(init=False)
    output_dim: int = field(init=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].cols != layers[i - 1].rows:
                raise ValueError(
                    f"layer {i} expects {layers[i].cols} inputs, "
                    f"layer {i - 1} produces {layers[i - 1].rows}"
                )
        if layers[-1].is_relu:
            raise ValueError("the last layer must have identity activation")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_dim", layers[0].cols)
        object.__setattr__(self, "output_dim", layers[-1].rows)

    @property
    def relu_count(self) -> int:
        return sum(layer.rows for layer in self.layers if layer.is_relu)

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.rows for layer in self.layers[:-1]]

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def __repr__(self) -> str:
        widths = [self.input_dim] + [layer.rows for layer in self.layers]
        return f"Network({self.name!r}, {'-'.join(map(str, widths))})"


def _check_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.input_dim:
        raise ShapeError(f"expected input of length {net.input_dim}, got {x.shape[-1]}")
    return x


def evaluate(net: Network, x) -> np.ndarray:
    """Forward pass. ``x`` may be a single point or a batch (rows)."""
    v = _check_input(net, x)
    for layer in net.layers:
        v = v @ layer.weights.T + layer.bias
        if layer.is_relu:
            v = np.maximum(v, 0.0)
    return v


def activations(net: Network, x) -> list[tuple[np.ndarray, np.ndarray]]:
    """(pre, post) activation values of every layer for a single point or batch."""
    v = _check_input(net, x)
    out = []
    for layer in net.layers:
        pre = v @ layer.weights.T + layer.bias
        v = np.maximum(pre, 0.0) if layer.is_relu else pre
        out.append((pre, v))
    return out


def _with_hidden_layer(net: Network) -> list[Layer]:
    """Rewrite a single affine layer ``Wx + b`` as ``W relu(x) - W relu(-x) + b``."""
    (layer,) = net.layers
    n = net.input_dim
    split = Layer(np.vstack([np.eye(n), -np.eye(n)]), np.zeros(2 * n), Activation.RELU)
    head = Layer(np.hstack([layer.weights, -layer.weights]), layer.bias, Activation.IDENTITY)
    return [split, head]


def _pad(net: Network, depth: int) -> list[Layer]:
    layers = list(net.layers)
    if len(layers) >= depth:
        return layers
    if len(layers) == 1:
        layers = _with_hidden_layer(net)
    # Hidden post-activations are non-negative, so relu(I h) == h exactly.
    width = layers[-1].cols
    passthrough = Layer(np.eye(width), np.zeros(width), Activation.RELU)
    return layers[:-1] + [passthrough] * (depth - len(layers)) + layers[-1:]


def concatenate(n1: Network, n2: Network, name: str | None = None) -> Network:
    """Side-by-side network computing ``[n1(x); n2(x)]`` from one shared input.

    Hidden layers are block-diagonal. The shallower network is padded with
    identity passthrough layers so both branches line up depth by depth.
    """
    if n1.input_dim != n2.input_dim:
        raise CompositionError(f"input dims differ: {n1.input_dim} vs {n2.input_dim}")
    depth = max(len(n1.layers), len(n2.layers))
    a, b = _pad(n1, depth), _pad(n2, depth)
    layers = []
    for i, (la, lb) in enumerate(zip(a, b)):
        if i == 0:
            w = np.vstack([la.weights, lb.weights])
        else:
            w = np.zeros((la.rows + lb.rows, la.cols + lb.cols))
            w[: la.rows, : la.cols] = la.weights
            w[la.rows :, la.cols :] = lb.weights
        layers.append(Layer(w, np.concatenate([la.bias, lb.bias]), la.activation))
    return Network(tuple(layers), name or f"[{n1.name};{n2.name}]")


def difference_network(net: Network, coeffs: Sequence[float]) -> Network:
    """Append a linear read-out ``coeffs . y`` to ``net``'s output layer."""
    c = np.asarray(coeffs, dtype=np.float64).reshape(1, -1)
    last = net.layers[-1]
    head = Layer(c @ last.weights, c @ last.bias, Activation.IDENTITY)
    return Network(net.layers[:-1] + (head,), f"{net.name}.diff")


# ---------------------------------------------------------------- .ffnt I/O

FFNT_MAGIC = "ffnt 1"


def dumps(net: Network) -> str:
    fmt = "{:.17g}".format
    lines = [FFNT_MAGIC, f"# {net.name}", f"{net.input_dim} {len(net.layers)}"]
    for layer in net.layers:
        lines.append(f"{layer.rows} {layer.cols} {layer.activation.value}")
        for row in layer.weights:
            lines.append(" ".join(fmt(v) for v in row))
        lines.append(" ".join(fmt(v) for v in layer.bias))
    return "\n".join(lines) + "\n"


def save(net: Network, path) -> None:
    Path(path).write_text(dumps(net))


def loads(text: str, name: str = "net") -> Network:
    rows_iter = [
        (i + 1, ln.strip())
        for i, ln in enumerate(text.splitlines())
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    pos = 0
    last_line = len(text.splitlines())

    def take(what: str) -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(rows_iter):
            raise ParseError(f"unexpected end of file, expected {what}", last_line + 1)
        lineno, content = rows_iter[pos]
        pos += 1
        return lineno, content.split()

    def floats(lineno: int, toks: list[str], n: int, what: str) -> list[float]:
        if len(toks) != n:
            raise ParseError(f"{what}: expected {n} values, got {len(toks)}", lineno)
        try:
            vals = [float(t) for t in toks]
        except ValueError as exc:
            raise ParseError(f"{what}: {exc}", lineno) from None
        if not all(np.isfinite(vals)):
            raise ParseError(f"{what}: non-finite value", lineno)
        return vals

    def ints(lineno: int, toks: list[str], n: int, what: str) -> list[int]:
        if len(toks) < n:
            raise ParseError(f"{what}: expected {n} fields", lineno)
        try:
            vals = [int(t) for t in toks[:n]]
        except ValueError:
            raise ParseError(f"{what}: expected integers", lineno) from None
        if any(v <= 0 for v in vals):
            raise ParseError(f"{what}: sizes must be positive", lineno)
        return vals

    lineno, toks = take("header")
    if " ".join(toks) != FFNT_MAGIC:
        raise ParseError(f"bad header {' '.join(toks)!r}, expected {FFNT_MAGIC!r}", lineno)
    lineno, toks = take("'<input_dim> <num_layers>'")
    if len(toks) != 2:
        raise ParseError("expected '<input_dim> <num_layers>'", lineno)
    input_dim, num_layers = ints(lineno, toks, 2, "dimensions")

    layers = []
    cols_expected = input_dim
    for k in range(num_layers):
        lineno, toks = take(f"header of layer {k}")
        if len(toks) != 3:
            raise ParseError(f"layer {k}: expected '<rows> <cols> <relu|identity>'", lineno)
        rows, cols = ints(lineno, toks, 2, f"layer {k}")
        if cols != cols_expected:
            raise ParseError(f"layer {k}: {cols} columns, expected {cols_expected}", lineno)
        try:
            act = Activation(toks[2].lower())
        except ValueError:
            raise ParseError(f"layer {k}: unknown activation {toks[2]!r}", lineno) from None
        w = []
        for r in range(rows):
            ln, t = take(f"row {r} of layer {k}")
            w.append(floats(ln, t, cols, f"layer {k} row {r}"))
        ln, t = take(f"bias of layer {k}")
        b = floats(ln, t, rows, f"layer {k} bias")
        layers.append(Layer(np.array(w), np.array(b), act))
        cols_expected = rows
    if pos != len(rows_iter):
        raise ParseError("trailing content after last layer", rows_iter[pos][0])
    if layers[-1].is_relu:
        raise ParseError("last layer must be identity", lineno)
    return Network(tuple(layers), name)


def load(path) -> Network:
    path = Path(path)
    return loads(path.read_text(), name=path.stem)


def toy_network() -> Network:
    """The two-input, two-hidden-neuron toy network used throughout the docs."""
    return Network(
        (
            Layer([[1.0, 4.0], [-3.0, 2.0]], [1.0, -2.0], Activation.RELU),
            Layer([[2.0, -2.0]], [0.0], Activation.IDENTITY),
        ),
        name="toy",
    )


def scaled_output(net: Network, factor: float, name: str | None = None) -> Network:
    """Copy of ``net`` with its output layer multiplied by ``factor``."""
    last = net.layers[-1]
    head = Layer(last.weights * factor, last.bias * factor, Activation.IDENTITY)
    return Network(net.layers[:-1] + (head,), name or f"{net.name}*{factor:g}")


def random_network(
    rng: np.random.Generator,
    input_dim: int,
    hidden: Sequence[int],
    output_dim: int = 1,
    scale: float = 1.0,
    name: str = "rand",
) -> Network:
    """Gaussian-weight network; handy for tests and demos."""
    layers = []
    prev = input_dim
    for width in hidden:
        layers.append(
            Layer(rng.normal(0, scale, (width, prev)), rng.normal(0, scale, width), Activation.RELU)
        )
        prev = width
    layers.append(
        Layer(rng.normal(0, scale, (output_dim, prev)), rng.normal(0, scale, output_dim),
              Activation.IDENTITY)
    )
    return Network(tuple(layers), name)
