"""Gradient-quality factor ``q`` from Krum-style neighbour-distance scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .datagen import Dataset
from .model import MLPParams, per_sample_gradients

LAST_LAYER_ABOVE = 5000


@dataclass(frozen=True)
class KrumConfig:
    k: int | None = None
    beta_assumed: float = 0.3
    layer_scope: str = "auto"

    def resolve_k(self, n: int) -> int:
        if self.k is not None:
            return self.k
        f = int(np.floor(self.beta_assumed * n + 0.5))
        return int(min(max(n - f - 2, 1), n - 1))

    def resolve_scope(self, n: int) -> str:
        if self.layer_scope != "auto":
            return self.layer_scope
        return "last_layer" if n > LAST_LAYER_ABOVE else "all"


def squared_distances(g: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances via the Gram expansion."""
    g = np.asarray(g, dtype=np.float64)
    sq = np.einsum("ij,ij->i", g, g)
    d = sq[:, None] + sq[None, :] - 2.0 * (g @ g.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def krum_scores(gradients: np.ndarray, k: int) -> np.ndarray:
    """Sum of squared distances from each row to its ``k`` nearest other rows."""
    g = np.asarray(gradients, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    n = g.shape[0]
    if n < 3:
        raise ValueError("krum scoring needs at least 3 rows")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} outside [1, {n - 1}]")
    return _kernels.knn_row_sums(np.ascontiguousarray(squared_distances(g)), int(k))


def normalize_q(scores) -> np.ndarray:
    """Map scores to [0, 1] with the lowest score at 1 and the highest at 0."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.ones_like(s)
    return 1.0 - (s - lo) / (hi - lo)


def compute_q(params: MLPParams, dataset: Dataset, config: KrumConfig | None = None) -> np.ndarray:
    config = config or KrumConfig()
    grads = per_sample_gradients(params, dataset, config.resolve_scope(dataset.n))
    return normalize_q(krum_scores(grads, config.resolve_k(dataset.n)))
