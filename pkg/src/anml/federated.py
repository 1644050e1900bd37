"""Contributor-level versus sample-level attribution under varying detectability.

Workers are simulated in one process: a worker is just the set of samples
sharing a ``contributor_id``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import datagen
from .combine import n_keep, pearson, weighted_select
from .model import TrainConfig, evaluate, per_sample_losses, train

LEVELS = ("sample", "contributor")


@dataclass(frozen=True)
class AttributionLevel:
    level: str = "sample"
    aggregator: str = "mean"

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown attribution level {self.level!r}")
        if self.aggregator != "mean":
            raise ValueError("only mean aggregation is supported")


@dataclass(frozen=True)
class SweepCondition:
    subtle_fraction: float
    beta: float = 0.4
    n_workers: int = 10
    trials: int = 5

    def __post_init__(self):
        if not 0.0 <= self.subtle_fraction <= 1.0:
            raise ValueError("subtle_fraction must be in [0, 1]")


@dataclass
class SweepSettings:
    source: str = "digits"
    subset_n: int = 500
    test_fraction: float = 0.3
    keep_fraction: float = 0.6
    warmup_epochs: int = 150
    epochs: int = 500
    learning_rate: float = 0.001
    score: str = "loss"
    extra: dict = field(default_factory=dict)


def detectability(per_sample_losses, corrupt_mask) -> float:
    """Pearson correlation of loss ranks (average ties) with the corruption indicator."""
    mask = np.asarray(corrupt_mask, dtype=bool)
    if mask.all() or not mask.any():
        raise ValueError("corrupt_mask must contain both clean and corrupt samples")
    ranks = stats.rankdata(np.asarray(per_sample_losses, dtype=np.float64))
    return pearson(ranks, mask.astype(float))


def contributor_scores(scores, contributor_id) -> tuple[np.ndarray, np.ndarray]:
    """Unique contributor ids and the mean member score of each."""
    ids, inverse = np.unique(np.asarray(contributor_id), return_inverse=True)
    sums = np.bincount(inverse, weights=np.asarray(scores, dtype=np.float64))
    counts = np.bincount(inverse)
    return ids, sums / counts


def attribute_and_filter(scores, contributor_id, level: str | AttributionLevel, keep_fraction: float) -> np.ndarray:
    """Indices kept after filtering on quality ``scores`` (higher is better).

    Pass negated losses to filter on loss. At contributor level the top
    ``round(keep_fraction * n_contributors)`` contributors by mean score are kept
    with all their samples.
    """
    level = level.level if isinstance(level, AttributionLevel) else level
    scores = np.asarray(scores, dtype=np.float64)
    if level == "sample":
        return weighted_select(scores, keep_fraction)
    if level != "contributor":
        raise ValueError(f"unknown attribution level {level!r}")
    if contributor_id is None:
        raise ValueError("contributor-level attribution needs contributor ids")
    contributor_id = np.asarray(contributor_id)
    if len(contributor_id) != len(scores):
        raise ValueError("contributor_id length does not match scores")
    ids, means = contributor_scores(scores, contributor_id)
    order = np.lexsort((ids, -means))
    kept = ids[order[: n_keep(len(ids), keep_fraction)]]
    return np.flatnonzero(np.isin(contributor_id, kept))


def relative_improvement(err_base: float, err_method: float) -> float:
    if err_base == 0:
        return float("nan")
    return (err_base - err_method) / err_base


def detectability_trial(condition: SweepCondition, settings: SweepSettings, seed_seq) -> dict:
    """One simulated federated run: uniform baseline and both filtered variants."""
    seeds = np.random.SeedSequence(seed_seq).generate_state(6)
    ds = datagen.load_dataset(settings.source, seed=int(seeds[0]), cap=settings.subset_n)
    train_ds, test_ds = datagen.split(ds, settings.test_fraction, int(seeds[1]))
    train_ds = datagen.assign_contributors(train_ds, condition.n_workers, int(seeds[2]))
    plan = datagen.CorruptionPlan(condition.beta, "offset_flip", condition.subtle_fraction)
    train_ds = datagen.inject_corruption(train_ds, plan, "contributor", int(seeds[3]))

    warm = train(train_ds, config=TrainConfig(epochs=settings.warmup_epochs, learning_rate=settings.learning_rate,
                                              seed=int(seeds[4])))
    losses = per_sample_losses(warm, train_ds.features, train_ds.labels)
    if settings.score == "loss":
        scores = -losses
    else:
        from .quality import KrumConfig, compute_q

        scores = compute_q(warm, train_ds, KrumConfig())
    rho_d = detectability(losses, train_ds.corrupt_mask) if 0 < train_ds.corrupt_mask.sum() < train_ds.n else 0.0

    cfg = TrainConfig(epochs=settings.epochs, learning_rate=settings.learning_rate, seed=int(seeds[5]))
    out = {"rho_d": rho_d}
    selections = {
        "uniform": np.arange(train_ds.n),
        "sample": attribute_and_filter(scores, train_ds.contributor_id, "sample", settings.keep_fraction),
        "contributor": attribute_and_filter(scores, train_ds.contributor_id, "contributor", settings.keep_fraction),
    }
    for name, idx in selections.items():
        params = train(train_ds, indices=idx, config=cfg)
        out[name] = {
            "error": evaluate(params, test_ds),
            "precision": float(np.mean(~train_ds.corrupt_mask[idx])),
        }
    return out


def summarize_condition(subtle_fraction: float, trials: list[dict]) -> dict:
    err = {k: float(np.mean([t[k]["error"] for t in trials])) for k in ("uniform", "sample", "contributor")}
    d_sample = relative_improvement(err["uniform"], err["sample"])
    d_contrib = relative_improvement(err["uniform"], err["contributor"])
    ratio = d_contrib / d_sample if d_sample > 0 else float("nan")
    return {
        "subtle_fraction": subtle_fraction,
        "abs_rho_d": float(np.mean([abs(t["rho_d"]) for t in trials])),
        "sample_delta": d_sample,
        "contributor_delta": d_contrib,
        "ratio": ratio,
        "err_uniform": err["uniform"],
        "err_sample": err["sample"],
        "err_contributor": err["contributor"],
    }


def sweep_correlation(rows: list[dict]) -> dict:
    """Pearson correlation between detectability and the contributor/sample ratio."""
    pts = [(r["abs_rho_d"], r["ratio"]) for r in rows if np.isfinite(r["ratio"])]
    if len(pts) < 3:
        return {"pearson_r": float("nan"), "p_value": float("nan"), "n": len(pts)}
    x, y = map(np.asarray, zip(*pts))
    if x.std() == 0 or y.std() == 0:
        return {"pearson_r": 0.0, "p_value": 1.0, "n": len(pts)}
    res = stats.pearsonr(x, y)
    return {"pearson_r": float(res.statistic), "p_value": float(res.pvalue), "n": len(pts)}


def run_detectability_sweep(conditions: list[SweepCondition], seed: int = 0, settings: SweepSettings | None = None,
                            map_fn=map):
    """Rows ``{subtle_fraction, abs_rho_d, sample_delta, contributor_delta, ratio}`` plus a
    summary correlation entry. Each (condition, trial) gets its own seed stream."""
    settings = settings or SweepSettings()
    jobs = [(ci, t) for ci, c in enumerate(conditions) for t in range(c.trials)]
    results = list(map_fn(_sweep_job, [(conditions[ci], settings, (seed, ci, t)) for ci, t in jobs]))
    per_cond: dict[int, list] = {}
    for (ci, _), res in zip(jobs, results):
        per_cond.setdefault(ci, []).append(res)
    rows = [summarize_condition(c.subtle_fraction, per_cond.get(ci, [])) for ci, c in enumerate(conditions)]
    return rows, sweep_correlation(rows), per_cond


def _sweep_job(args):
    condition, settings, key = args
    return detectability_trial(condition, settings, list(key))
