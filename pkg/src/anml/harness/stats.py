"""Paired statistics over trial results."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d arrays of equal length")
    if len(a) < 2:
        raise ValueError("paired statistics need at least 2 trials")
    return a, b


def improvement(errors_method, errors_baseline) -> float:
    """Percent reduction of mean error relative to the baseline; NaN for a zero baseline."""
    m = np.asarray(errors_method, dtype=np.float64)
    b = np.asarray(errors_baseline, dtype=np.float64)
    if m.shape != b.shape:
        raise ValueError("improvement needs equal trial counts")
    base = b.mean()
    if base == 0:
        return float("nan")
    return float(100.0 * (base - m.mean()) / base)


def paired_ttest(a, b) -> float:
    """Two-sided paired t-test p-value on ``a - b``."""
    a, b = _pair(a, b)
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0:
        return 1.0 if mean == 0 else 0.0
    t = mean / (sd / math.sqrt(len(d)))
    return float(2.0 * sps.t.sf(abs(t), len(d) - 1))


def cohens_d(a, b) -> float:
    """``(mean(b) - mean(a)) / pooled_sd``; positive when ``a`` has the lower error."""
    a, b = _pair(a, b)
    pooled = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / 2.0)
    if pooled == 0:
        return float("nan")
    return float((b.mean() - a.mean()) / pooled)


def effect_label(d: float) -> str:
    if not np.isfinite(d):
        return "n/a"
    d = abs(d)
    if d >= 0.8:
        return "large"
    if d >= 0.5:
        return "medium"
    if d >= 0.2:
        return "small"
    return "negligible"


def t_interval(x, level: float = 0.95) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    m = float(x.mean())
    if len(x) < 2:
        return m, m
    half = sps.t.ppf(0.5 + level / 2.0, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x))
    return m - half, m + half


@dataclass(frozen=True)
class SummaryStats:
    method: str
    sweep: str
    sweep_value: object
    n: int
    mean: float
    std: float
    ci_lo: float
    ci_hi: float
    improvement: float
    p_value: float
    cohens_d: float
    precision: float
    precision_std: float
    stage1_rate: float
    stage2_rate: float
    blend_rate: float
    fallback_rate: float
    rho_c: float
    extra: dict

    @property
    def effect(self) -> str:
        return effect_label(self.cohens_d)


def _branch_rates(branches: list[str]) -> tuple[float, float, float, float]:
    if not branches or all(b == "not_applicable" for b in branches):
        nan = float("nan")
        return nan, nan, nan, nan
    n = len(branches)
    skip = sum(b == "skip_selection" for b in branches) / n
    blend = sum(b == "blend" for b in branches) / n
    fallback = sum(b == "krum_fallback" for b in branches) / n
    return skip, blend + fallback, blend, fallback


def summarize_group(method: str, point, trials, baseline_trials) -> SummaryStats:
    """Summary for one (method, sweep point); both trial lists sorted by trial index."""
    err = np.array([t.error for t in trials])
    prec = np.array([t.precision for t in trials])
    lo, hi = t_interval(err)
    if baseline_trials is not None and len(baseline_trials) == len(trials) and len(trials) >= 2:
        base = np.array([t.error for t in baseline_trials])
        imp = improvement(err, base)
        p = paired_ttest(err, base)
        d = cohens_d(err, base)
    else:
        imp = p = d = float("nan")
    skip, stage2, blend, fallback = _branch_rates([t.branch for t in trials])
    rhos = np.array([t.rho_c for t in trials if t.rho_c is not None], dtype=np.float64)
    extra_keys = sorted({k for t in trials for k, v in t.extra.items() if isinstance(v, (int, float))})
    extra = {k: float(np.mean([t.extra[k] for t in trials if k in t.extra])) for k in extra_keys}
    return SummaryStats(
        method=method,
        sweep=point.label,
        sweep_value=point.value,
        n=len(trials),
        mean=float(err.mean()),
        std=float(err.std(ddof=1)) if len(err) > 1 else 0.0,
        ci_lo=float(min(lo, err.mean())),
        ci_hi=float(max(hi, err.mean())),
        improvement=imp,
        p_value=p,
        cohens_d=d,
        precision=float(prec.mean()),
        precision_std=float(prec.std(ddof=1)) if len(prec) > 1 else 0.0,
        stage1_rate=skip,
        stage2_rate=stage2,
        blend_rate=blend,
        fallback_rate=fallback,
        rho_c=float(rhos.mean()) if len(rhos) else float("nan"),
        extra=extra,
    )


def summarize(results, baseline: str) -> list[SummaryStats]:
    """One row per (sweep point, method) in first-seen order."""
    groups: dict[tuple, list] = {}
    points = {}
    for t in results:
        groups.setdefault((t.point.index, t.method), []).append(t)
        points[t.point.index] = t.point
    rows = []
    for (pi, method), trials in groups.items():
        trials = sorted(trials, key=lambda t: t.trial)
        base = groups.get((pi, baseline))
        base = sorted(base, key=lambda t: t.trial) if base else None
        rows.append(summarize_group(method, points[pi], trials, base))
    return rows
