"""Arithmetic networks benchmark: learn ``y = x[0] + x[1]`` from
``d``-dimensional uniform inputs, then measure how the learned function
extrapolates out of distribution.

All randomness comes from numpy's Philox counter-based generator
(``np.random.Generator(np.random.Philox(seed))``), whose streams are fixed
by the algorithm and do not depend on platform.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .net import Activation, Layer, Network, evaluate

log = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    d: int
    low: float
    high: float
    seed: int

    def __len__(self) -> int:
        return self.labels.size


def target(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[..., 0] + x[..., 1]


def gen_dataset(n: int, d: int = 10, low: float = -10.0, high: float = 10.0, seed: int = 0) -> Dataset:
    if d < 2:
        raise ValueError(f"need at least 2 input coordinates, got d={d}")
    if low > high:
        raise ValueError("low must not exceed high")
    x = make_rng(seed).uniform(low, high, size=(n, d))
    return Dataset(x, target(x), d, low, high, seed)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    hidden: tuple[int, ...] = (10, 10, 10)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")


def init_network(d: int, hidden: Sequence[int], rng: np.random.Generator, name="arith") -> Network:
    """Weights and biases uniform in ``+-1/sqrt(fan_in)``."""
    layers = []
    prev = d
    widths = list(hidden) + [1]
    for i, width in enumerate(widths):
        bound = 1.0 / np.sqrt(prev)
        w = rng.uniform(-bound, bound, size=(width, prev))
        b = rng.uniform(-bound, bound, size=width)
        act = Activation.IDENTITY if i == len(widths) - 1 else Activation.RELU
        layers.append(Layer(w, b, act))
        prev = width
    return Network(tuple(layers), name)


def train(cfg: TrainConfig, data: Dataset, name: str | None = None) -> Network:
    """Mini-batch Adam on mean squared error; returns the trained network."""
    rng = make_rng(cfg.seed)
    net = init_network(data.d, cfg.hidden, rng, name or f"arith_s{cfg.seed}")
    if cfg.epochs == 0:
        return net
    W = [np.array(layer.weights) for layer in net.layers]
    B = [np.array(layer.bias) for layer in net.layers]
    params = W + B
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    X, Y = data.inputs, data.labels
    n = len(data)
    L = len(W)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = X[idx], Y[idx]
            # forward
            acts = [xb]
            h = xb
            for k in range(L):
                z = h @ W[k].T + B[k]
                h = np.maximum(z, 0.0) if k < L - 1 else z
                acts.append(h)
            err = h[:, 0] - yb
            total += float(err @ err)
            # backward
            g = (2.0 / idx.size) * err[:, None]
            grads_w, grads_b = [None] * L, [None] * L
            for k in range(L - 1, -1, -1):
                grads_w[k] = g.T @ acts[k]
                grads_b[k] = g.sum(axis=0)
                if k:
                    g = (g @ W[k]) * (acts[k] > 0)
            grads = grads_w + grads_b
            step += 1
            b1, b2 = cfg.beta1, cfg.beta2
            lr_t = cfg.learning_rate * np.sqrt(1 - b2**step) / (1 - b1**step)
            for p, gr, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1 - b1) * gr
                vi *= b2
                vi += (1 - b2) * gr * gr
                p -= lr_t * mi / (np.sqrt(vi) + cfg.adam_eps)
        loss = total / n
        if not np.isfinite(loss):
            raise TrainingError("loss diverged to a non-finite value", epoch)
        log.info("seed %d epoch %d mse %.6g", cfg.seed, epoch, loss)
    layers = tuple(
        Layer(W[k], B[k], Activation.IDENTITY if k == L - 1 else Activation.RELU) for k in range(L)
    )
    return Network(layers, net.name)


@dataclass
class ErrorStats:
    max_abs_error: float
    mean_abs_error: float
    n_samples: int
    tag: str = "in-dist"

    def to_json(self) -> dict:
        return {"max_abs_error": self.max_abs_error, "mean_abs_error": self.mean_abs_error,
                "n_samples": self.n_samples, "tag": self.tag}


def errors_on(predict, x: np.ndarray, tag: str = "in-dist") -> ErrorStats:
    err = np.abs(np.asarray(predict(x)).reshape(-1) - target(x))
    return ErrorStats(float(err.max()), float(err.mean()), int(err.size), tag)


def evaluate_errors(
    net: Network,
    d: int = 10,
    low: float = -10.0,
    high: float = 10.0,
    n_samples: int = 10_000,
    seed: int = 0,
    tag: str = "in-dist",
) -> ErrorStats:
    """Max and mean ``|net(x) - (x[0] + x[1])|`` over uniform samples."""
    x = make_rng(seed).uniform(low, high, size=(n_samples, d))
    return errors_on(lambda a: evaluate(net, a), x, tag)


def ensemble_predict(nets: Sequence[Network], x) -> np.ndarray:
    """Average of the members' outputs."""
    if not nets:
        raise ValueError("an ensemble needs at least one member")
    dims = {(n.input_dim, n.output_dim) for n in nets}
    if len(dims) != 1:
        raise ValueError(f"members disagree on input/output dims: {sorted(dims)}")
    return np.mean([evaluate(n, x) for n in nets], axis=0)


@dataclass
class PoolEntry:
    seed: int
    net: Network
    in_dist: ErrorStats
    ood: ErrorStats
    extra: dict = field(default_factory=dict)


def train_pool(
    seeds: Sequence[int],
    cfg: TrainConfig,
    n_train: int = 10_000,
    data_seed: int = 0,
    d: int = 10,
    train_range: tuple[float, float] = (-10.0, 10.0),
    ood_range: tuple[float, float] = (-1000.0, 1000.0),
    n_eval: int = 10_000,
    eval_seed: int = 1,
) -> list[PoolEntry]:
    """Train one model per seed on a shared dataset and score it in/out of distribution."""
    data = gen_dataset(n_train, d, *train_range, seed=data_seed)
    pool = []
    for s in seeds:
        c = TrainConfig(cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.hidden, s)
        net = train(c, data)
        pool.append(PoolEntry(
            s, net,
            evaluate_errors(net, d, *train_range, n_samples=n_eval, seed=eval_seed, tag="in-dist"),
            evaluate_errors(net, d, *ood_range, n_samples=n_eval, seed=eval_seed, tag="ood"),
        ))
    return pool
