"""Signal combination (multiplicative, softmax blend, two-stage adaptive) and
the weight-to-training-set mappings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SKIP_SELECTION = "skip_selection"
BLEND = "blend"
KRUM_FALLBACK = "krum_fallback"
NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class GateDecision:
    branch: str = NOT_APPLICABLE
    rho_c: float | None = None
    min_s: float | None = None


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray
    normalization: str = "raw"
    gate: GateDecision = GateDecision()

    @property
    def skip_selection(self) -> bool:
        return self.gate.branch == SKIP_SELECTION


@dataclass(frozen=True)
class CombineConfig:
    alpha: float = 0.5
    tau_s: float = 1.0
    tau_h: float = 0.35
    tau_c: float = 0.3
    keep_fraction: float = 0.7
    apply_T: bool = False
    delta: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.tau_s <= 0:
            raise ValueError("tau_s must be > 0")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


def _vectors(*arrays):
    out = [np.asarray(a, dtype=np.float64) for a in arrays]
    n = len(out[0])
    if any(len(a) != n for a in out):
        raise ValueError("signal vectors must have equal length")
    return out


def softmax(x) -> np.ndarray:
    z = np.asarray(x, dtype=np.float64)
    z = np.exp(z - z.max())
    return z / z.sum()


def pearson(a, b) -> float:
    """Pearson correlation; 0 when either input has zero variance."""
    a, b = _vectors(a, b)
    if len(a) < 2:
        raise ValueError("pearson needs at least 2 points")
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    if not den > 0:
        return 0.0
    return float(np.clip(a @ b / den, -1.0, 1.0))


def multiplicative(q, v, r, T=None) -> WeightVector:
    """Raw product of the four factors.

    Evaluated as ``((v * r) * q) * T`` so that ``v * r`` acts as one exact
    scale factor on ``q * T``.
    """
    if T is None:
        T = np.ones(len(q))
    q, v, r, T = _vectors(q, v, r, T)
    return WeightVector(v * r * q * T, "raw")


def softmax_blend(q, v, r, alpha: float = 0.5, tau_s: float = 1.0) -> WeightVector:
    q, v, r = _vectors(q, v, r)
    if tau_s <= 0:
        raise ValueError("tau_s must be > 0")
    w = alpha * softmax(q / tau_s) + (1.0 - alpha) * softmax(v * r / tau_s)
    return WeightVector(w / w.sum(), "l1")


def two_stage_adaptive(q, v, r, tau_h: float = 0.35, tau_c: float = 0.3, alpha: float = 0.5,
                       tau_s: float = 1.0) -> WeightVector:
    """Homogeneity check, then correlation-gated blend or fall back to ``q``."""
    q, v, r = _vectors(q, v, r)
    n = len(q)
    if n < 3:
        raise ValueError("adaptive gating needs at least 3 samples")
    s = v * r
    min_s = float(s.min())
    if min_s > tau_h:
        return WeightVector(np.full(n, 1.0 / n), "l1", GateDecision(SKIP_SELECTION, None, min_s))
    rho = pearson(q, s)
    if rho > tau_c:
        w = alpha * softmax(q / tau_s) + (1.0 - alpha) * softmax(s / tau_s)
        return WeightVector(w / w.sum(), "l1", GateDecision(BLEND, rho, min_s))
    total = q.sum()
    w = q / total if total > 0 else np.full(n, 1.0 / n)
    return WeightVector(w, "l1", GateDecision(KRUM_FALLBACK, rho, min_s))


def apply_temporal(wv: WeightVector, T) -> WeightVector:
    w, T = _vectors(wv.w, T)
    out = w * T
    if wv.normalization == "l1":
        total = out.sum()
        out = out / total if total > 0 else out
    return WeightVector(out, wv.normalization, wv.gate)


def n_keep(n: int, keep_fraction: float) -> int:
    return max(1, int(np.floor(keep_fraction * n + 0.5)))


def weighted_select(w, keep_fraction: float) -> np.ndarray:
    """Sorted indices of the largest ``round(keep_fraction * n)`` weights; ties go to lower index."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    w = np.asarray(w, dtype=np.float64)
    m = n_keep(len(w), keep_fraction)
    order = np.lexsort((np.arange(len(w)), -w))
    return np.sort(order[:m])


def weighted_sample(w, m: int, seed: int = 0) -> np.ndarray:
    """``m`` independent draws with probability proportional to ``w``."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise ValueError("weights sum to zero")
    rng = np.random.default_rng([seed, 0x5A3])
    return rng.choice(len(w), size=m, p=w / total)
