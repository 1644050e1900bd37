"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are echoed in the terminal
summary) or ``python tests/test_acceptance.py`` for the bare report.
"""

from __future__ import annotations

import functools
from fractions import Fraction
import json
import time

import numpy as np
import pytest
from scipy import stats as sps

from anml import combine, model
from anml.datagen import load_dataset
from anml.harness import recipes
from anml.harness.experiment import run_experiment
from anml.harness.stats import cohens_d, improvement, paired_ttest, summarize

LINES: list[str] = []

pytestmark = pytest.mark.slow


def report(cid: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}"
    LINES.append(line)
    print(line)
    return ok


@functools.lru_cache(maxsize=None)
def _run(name: str, **overrides):
    cfg = recipes.get(name, **{k: _thaw(v) for k, v in overrides.items()})
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    return res, time.perf_counter() - t0


def _freeze(d):
    return json.dumps(d, sort_keys=True)


def _thaw(v):
    return json.loads(v) if isinstance(v, str) and v[:1] in "{[" else v


def _point(res, label, value):
    for p, _ in res.config.points():
        if p.label == label and p.value == value:
            return p.index
    raise KeyError((label, value))


def test_criterion_1_main_result():
    res, secs = _run("table6")
    ours, krum = res.errors("q×v×r"), res.errors("krum")
    imp, p, d = improvement(ours, krum), paired_ttest(ours, krum), cohens_d(ours, krum)
    ok = imp >= 35 and p < 0.01 and d > 0.6 and secs < 300
    assert report("1", ok, f"q×v×r vs krum improvement {imp:+.1f}% (>= +35), p={p:.2e} (< 0.01), "
                           f"d={d:.2f} (> 0.6), runtime {secs:.0f}s (< 300)")


def test_criterion_2a_homogeneous_signals_match_uniform():
    res, _ = _run("table6", methods=_freeze(["uniform", "adaptive"]), baseline="uniform",
                  corruption=_freeze({"beta": 0.0}))
    rows = {r.method: r for r in summarize(res.trials, "uniform")}
    stage1 = rows["adaptive"].stage1_rate
    gap = abs(rows["adaptive"].mean - rows["uniform"].mean)
    ok = stage1 >= 0.95 and gap <= 0.015
    assert report("2a", ok, f"beta=0 stage-1 rate {stage1:.0%} (>= 95%), |adaptive - uniform| = {100 * gap:.2f}pp (<= 1.5)")


def test_criterion_2b_adversarial_signals_fall_back_to_krum():
    res, _ = _run("table6", methods=_freeze(["krum", "adaptive"]), signals=_freeze({"scenario": "adversarial"}))
    rows = {r.method: r for r in summarize(res.trials, "krum")}
    fb = rows["adaptive"].fallback_rate
    gap = abs(rows["adaptive"].mean - rows["krum"].mean)
    ok = fb >= 0.90 and gap <= 0.02
    assert report("2b", ok, f"adversarial fallback rate {fb:.0%} (>= 90%), |adaptive - krum| = {100 * gap:.2f}pp (<= 2)")


def test_criterion_3_correlation_sweep():
    res, _ = _run("table10", methods=_freeze(["krum", "multiplicative"]))
    grid = [p.value for p, _ in res.config.points()]
    imps = []
    for i, _ in enumerate(grid):
        imps.append(improvement(res.errors("multiplicative", i), res.errors("krum", i)))
    at0 = imps[grid.index(0.0)]
    at7 = imps[grid.index(0.7)]
    rho = sps.spearmanr(grid, imps).statistic
    ok = at0 < 0 and at7 >= 20 and rho >= 0.9
    trend = " ".join(f"{v:+.0f}" for v in imps)
    assert report("3", ok, f"improvement at rho=0 {at0:+.1f}% (< 0), at rho=0.7 {at7:+.1f}% (>= +20), "
                           f"Spearman {rho:.3f} (>= 0.9); grid [{trend}]")


def test_criterion_4_data_efficiency():
    res, _ = _run("table12")
    small = res.errors("softmax", _point(res, "top_fraction", 0.2))
    full = res.errors("krum", _point(res, "data_fraction", 1.0))
    pool20 = res.errors("softmax", _point(res, "data_fraction", 0.2))
    p = paired_ttest(small, full)
    ok = small.mean() < full.mean() and p < 0.05
    assert report("4", ok, f"softmax on top 20% {100 * small.mean():.1f}% vs krum on all data {100 * full.mean():.1f}% "
                           f"(lower), paired p={p:.3g} (< 0.05); softmax on a random 20% pool "
                           f"{100 * pool20.mean():.1f}%")


def test_criterion_5_detectability_sweep():
    from anml.federated import summarize_condition, sweep_correlation

    res, secs = _run("table15")
    rows = []
    for p, _ in res.config.points():
        per_trial = {}
        for t in res.trials:
            if t.point.index == p.index:
                per_trial.setdefault(t.trial, {"rho_d": t.extra["rho_d"]})[t.method] = {"error": t.error}
        rows.append(summarize_condition(p.value, [per_trial[k] for k in sorted(per_trial)]))
    corr = sweep_correlation(rows)["pearson_r"]
    ratio = rows[-1]["ratio"]
    ok = corr <= -0.6 and ratio >= 2.0 and secs < 900
    assert report("5", ok, f"corr(|rho_d|, ratio) {corr:.3f} (<= -0.6), ratio at 100% subtle {ratio:.2f}x (>= 2), "
                           f"runtime {secs:.0f}s (< 900)")


def test_criterion_6_joint_attack():
    res, _ = _run("table16", sweep=_freeze({"axis": "attack_strategy", "values": ["joint"]}))
    trials = res.by("adaptive")
    low = np.mean([t.rho_c < 0.3 for t in trials])
    ad, kr, sm = res.errors("adaptive"), res.errors("krum"), res.errors("softmax")
    gap = abs(ad.mean() - kr.mean())
    ok = low >= 0.9 and gap <= 0.02 and sm.mean() >= ad.mean()
    assert report("6", ok, f"rho_c < 0.3 in {low:.0%} of trials (>= 90%), |adaptive - krum| = {100 * gap:.2f}pp (<= 2), "
                           f"softmax {100 * sm.mean():.1f}% >= adaptive {100 * ad.mean():.1f}%")


def test_criterion_7_temporal_drift():
    res, _ = _run("table17", methods=_freeze(["adaptive", "adaptive+T"]))
    i = _point(res, "label_drift", 0.3)
    with_t, without = res.errors("adaptive+T", i), res.errors("adaptive", i)
    label_ok = with_t.mean() <= without.mean()
    feats = []
    for p, _ in res.config.points():
        if p.label == "feature_drift" and p.value > 0:
            feats.append((p.value, res.errors("adaptive", p.index).mean() - res.errors("adaptive+T", p.index).mean()))
    feature_ok = all(delta <= 0.01 for _, delta in feats)
    fd = ", ".join(f"{v}: {100 * dlt:+.2f}pp" for v, dlt in feats)
    ok = label_ok and feature_ok
    assert report("7", ok, f"label drift 0.3: +T {100 * with_t.mean():.2f}% <= no-T {100 * without.mean():.2f}%; "
                           f"feature drift gain of T (<= +1pp) {fd}")


def test_criterion_8_algebraic_properties():
    rng = np.random.default_rng(8)
    checks = []

    # Krum special case
    q = rng.random(50)
    ones = np.ones(50)
    same = np.array_equal(combine.weighted_select(combine.multiplicative(q, ones, ones, ones).w, 0.7),
                          combine.weighted_select(q, 0.7))
    checks.append(("krum special case", same))

    # suppression bound and chain value
    qs, Ts = rng.random(100), rng.random(100)
    w = combine.multiplicative(qs, np.full(100, 0.1), np.full(100, 0.15), Ts).w
    checks.append(("suppression bound", bool(np.all(w <= 0.015 * qs * Ts)) and 0.1 * 0.15 == 0.015
                   and Fraction("0.015") ** 3 == Fraction("3.375e-6")))

    # normalization
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 40))
        a, b, c = rng.random(n), rng.random(n), rng.random(n)
        worst = max(worst, abs(combine.softmax_blend(a, b, c).w.sum() - 1),
                    abs(combine.two_stage_adaptive(a, b, c).w.sum() - 1))
    checks.append(("normalization", worst <= 1e-9))

    # gradient check
    worst_rel = 0.0
    for k in range(5):
        ds = load_dataset({"kind": "synthetic", "n": 6, "d": 4, "n_classes": 3}, seed=k)
        params = model.init_params(ds.d, 3, seed=k)
        g = model.per_sample_gradients(params, ds)
        crng = np.random.default_rng(100 + k)
        for _ in range(10):
            i = int(crng.integers(ds.n))
            j = int(crng.integers(params.n_params))
            h = 1e-6
            plus, minus = params.copy(), params.copy()
            plus.flat[j] += h
            minus.flat[j] -= h
            xi, yi = ds.features[i:i + 1], ds.labels[i:i + 1]
            fd = (model.per_sample_losses(plus, xi, yi)[0] - model.per_sample_losses(minus, xi, yi)[0]) / (2 * h)
            worst_rel = max(worst_rel, abs(fd - g[i, j]) / max(1e-8, abs(fd) + abs(g[i, j])))
    checks.append(("gradient check", worst_rel < 1e-3))

    # selection scale invariance
    wv = rng.random(200)
    base = combine.weighted_select(wv, 0.7)
    checks.append(("scale invariance", all(np.array_equal(combine.weighted_select(c * wv, 0.7), base)
                                           for c in (1e-6, 1.0, 1e6))))
    ok = all(c for _, c in checks)
    assert report("8", ok, ", ".join(f"{name} {'ok' if c else 'BROKEN'}" for name, c in checks)
                  + f" (max grad rel err {worst_rel:.1e})")


def test_criterion_9_detection_precision():
    res, _ = _run("table6")
    rows = {r.method: r for r in summarize(res.trials, "krum")}
    ours, krum = rows["q×v×r"].precision, rows["krum"].precision
    ok = ours >= 0.95 and ours - krum >= 0.08
    assert report("9", ok, f"q×v×r precision {100 * ours:.1f}% (>= 95), krum {100 * krum:.1f}%, "
                           f"gap {100 * (ours - krum):.1f}pp (>= 8)")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                pass
