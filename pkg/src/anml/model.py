"""Fixed-shape feed-forward network with manual backpropagation.

Parameters live in one flat float64 buffer; the per-layer weight matrices and
bias vectors are views into it, so the optimizer updates everything with a
single kernel call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .datagen import CLASSIFICATION, REGRESSION, Dataset

HIDDEN = (64, 32)


@dataclass
class MLPParams:
    flat: np.ndarray
    sizes: tuple
    task: str = CLASSIFICATION

    def layers(self):
        """List of ``(W, b)`` views into ``flat``."""
        out, pos = [], 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            W = self.flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = self.flat[pos:pos + fan_out]
            pos += fan_out
            out.append((W, b))
        return out

    def copy(self) -> "MLPParams":
        return MLPParams(self.flat.copy(), self.sizes, self.task)

    @property
    def n_params(self) -> int:
        return self.flat.size


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.001
    batch_size: int | None = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    full_batch_max: int = 2000
    minibatch: int = 256
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")

    def resolve_batch(self, n: int) -> int:
        if self.batch_size:
            return min(self.batch_size, n)
        return n if n <= self.full_batch_max else self.minibatch


def init_params(d_in: int, d_out: int, seed: int = 0, hidden=HIDDEN, task: str = CLASSIFICATION) -> MLPParams:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases."""
    if d_in < 1 or d_out < 1:
        raise ValueError("layer sizes must be >= 1")
    sizes = (d_in, *hidden, d_out)
    rng = np.random.default_rng([seed, 0x1217])
    n_params = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    params = MLPParams(np.zeros(n_params), sizes, task)
    for W, _ in params.layers():
        bound = np.sqrt(6.0 / W.shape[0])
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return params


def output_dim(dataset: Dataset) -> int:
    return dataset.n_classes if dataset.task == CLASSIFICATION else 1


def _forward(params: MLPParams, x):
    acts = [x]
    layers = params.layers()
    h = x
    for W, b in layers[:-1]:
        h = h @ W
        h += b
        np.maximum(h, 0.0, out=h)
        acts.append(h)
    W, b = layers[-1]
    out = h @ W
    out += b
    return acts, out


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def _output_delta(params, out, y):
    """Per-sample loss and d(loss_i)/d(out_i)."""
    if params.task == CLASSIFICATION:
        p = _softmax(out)
        rows = np.arange(len(y))
        loss = -np.log(np.maximum(p[rows, y], 1e-300))
        p[rows, y] -= 1.0
        return loss, p
    resid = out[:, 0] - y
    return 0.5 * resid**2, resid[:, None]


def per_sample_losses(params: MLPParams, x, y) -> np.ndarray:
    _, out = _forward(params, np.asarray(x, dtype=np.float64))
    loss, _ = _output_delta(params, out, np.asarray(y))
    return loss


def loss_and_grad(params: MLPParams, x, y, grad_out: np.ndarray | None = None):
    """Mean loss over the batch and its gradient as a flat vector."""
    acts, out = _forward(params, x)
    loss, delta = _output_delta(params, out, y)
    delta /= len(y)
    grad = np.empty_like(params.flat) if grad_out is None else grad_out
    views = MLPParams(grad, params.sizes, params.task).layers()
    layers = params.layers()
    for li in range(len(layers) - 1, -1, -1):
        gW, gb = views[li]
        np.matmul(acts[li].T, delta, out=gW)
        delta.sum(axis=0, out=gb)
        if li:
            delta = delta @ layers[li][0].T
            delta *= acts[li] > 0
    return float(loss.mean()), grad


def per_sample_gradients(params: MLPParams, dataset: Dataset, layer_scope: str = "all") -> np.ndarray:
    """Row ``i`` is the flattened gradient of sample ``i``'s loss.

    ``layer_scope='last_layer'`` keeps only the output layer's weights and
    bias (columns in parameter order).
    """
    x, y = dataset.features, dataset.labels
    acts, out = _forward(params, x)
    _, delta = _output_delta(params, out, y)
    n = len(y)
    layers = params.layers()
    blocks = []
    for li in range(len(layers) - 1, -1, -1):
        gW = np.einsum("ni,nj->nij", acts[li], delta).reshape(n, -1)
        blocks.append((gW, delta.copy()))
        if layer_scope == "last_layer":
            break
        if li:
            delta = delta @ layers[li][0].T
            delta *= acts[li] > 0
    if layer_scope not in ("all", "last_layer"):
        raise ValueError(f"unknown layer_scope {layer_scope!r}")
    cols = []
    for gW, gb in reversed(blocks):
        cols.extend((gW, gb))
    return np.concatenate(cols, axis=1)


class _Adam:
    def __init__(self, params: MLPParams, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = np.zeros_like(params.flat)
        self.v = np.zeros_like(params.flat)
        self.step = 0

    def __call__(self, grad):
        self.step += 1
        c = self.cfg
        _kernels.adam_update(self.params.flat, grad, self.m, self.v, c.learning_rate, c.beta1, c.beta2, c.eps, self.step)


def train(dataset: Dataset, indices=None, weights=None, config: TrainConfig | None = None,
          params: MLPParams | None = None) -> MLPParams:
    """Train from ``params`` (fresh init from ``config.seed`` when omitted).

    Selection mode (``indices``) trains uniformly on the subset. Sampling mode
    (``weights``) draws every minibatch with probability proportional to
    weight. With neither, all samples are used uniformly.
    """
    cfg = config or TrainConfig()
    if indices is not None and weights is not None:
        raise ValueError("pass either indices or weights, not both")
    x_all, y_all = dataset.features, dataset.labels
    probs = None
    if indices is not None:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise ValueError("empty selection")
        x_all, y_all = x_all[indices], y_all[indices]
    elif weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape[0] != dataset.n:
            raise ValueError("weights length mismatch")
        if np.any(weights < 0) or not weights.sum() > 0:
            raise ValueError("weights must be non-negative with a positive sum")
        probs = weights / weights.sum()

    if params is None:
        params = init_params(dataset.d, output_dim(dataset), seed=cfg.seed, task=dataset.task)
    else:
        params = params.copy()
    rng = np.random.default_rng([cfg.seed, 0x7A1])
    n = len(y_all)
    batch = cfg.resolve_batch(n)
    opt = _Adam(params, cfg)
    grad = np.empty_like(params.flat)
    steps = max(1, -(-n // batch))
    cfg.history.clear()
    for _ in range(cfg.epochs):
        if probs is not None:
            for _ in range(steps):
                idx = rng.choice(n, size=batch, p=probs)
                loss, _ = loss_and_grad(params, x_all[idx], y_all[idx], grad)
                opt(grad)
        elif batch >= n:
            loss, _ = loss_and_grad(params, x_all, y_all, grad)
            opt(grad)
        else:
            perm = rng.permutation(n)
            for start in range(0, n, batch):
                idx = perm[start:start + batch]
                loss, _ = loss_and_grad(params, x_all[idx], y_all[idx], grad)
                opt(grad)
        cfg.history.append(loss)
    if not np.all(np.isfinite(params.flat)):
        raise FloatingPointError("training diverged: non-finite parameters")
    return params


def predict(params: MLPParams, x) -> np.ndarray:
    _, out = _forward(params, np.asarray(x, dtype=np.float64))
    if params.task == CLASSIFICATION:
        return out.argmax(axis=1)
    return out[:, 0]


def evaluate(params: MLPParams, test: Dataset) -> float:
    """Error rate (classification) or mean absolute error (regression)."""
    if test.n == 0:
        raise ValueError("empty test set")
    if test.d != params.sizes[0]:
        raise ValueError(f"feature dimension {test.d} does not match model input {params.sizes[0]}")
    pred = predict(params, test.features)
    if params.task == CLASSIFICATION:
        return float(np.mean(pred != test.labels))
    if params.task == REGRESSION:
        return float(np.mean(np.abs(pred - test.labels)))
    raise ValueError(f"unknown task {params.task!r}")
