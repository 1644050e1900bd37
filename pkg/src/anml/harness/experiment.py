"""Turn a validated config into paired trials."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import datagen, signals
from ..attacks import AttackSpec, apply_attack
from ..combine import (NOT_APPLICABLE, CombineConfig, WeightVector, apply_temporal, multiplicative, pearson,
                       softmax_blend, two_stage_adaptive, weighted_select)
from ..federated import SweepCondition, SweepSettings, detectability_trial
from ..model import TrainConfig, evaluate, train
from ..quality import KrumConfig, compute_q
from .config import USES_Q, ExperimentConfig, SweepPoint

DETECTABILITY_METHODS = ("uniform", "sample", "contributor")
HONEST_TIERS = ("novice", "intermediate", "expert")


@dataclass(frozen=True)
class TrialResult:
    method: str
    point: SweepPoint
    trial: int
    seed: int
    error: float
    precision: float
    branch: str = NOT_APPLICABLE
    rho_c: float | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.precision <= 1.0:
            raise ValueError(f"precision {self.precision} outside [0, 1]")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trials: list[TrialResult]
    wall_time: float = 0.0

    def by(self, method: str, point_index: int = 0) -> list[TrialResult]:
        rows = [t for t in self.trials if t.method == method and t.point.index == point_index]
        return sorted(rows, key=lambda t: t.trial)

    def errors(self, method: str, point_index: int = 0) -> np.ndarray:
        return np.array([t.error for t in self.by(method, point_index)])


def trial_seeds(base_seed: int, point_index: int, trial: int, n: int = 12) -> np.ndarray:
    """Independent seed words for one (condition, trial) cell."""
    return np.random.SeedSequence([base_seed, point_index, trial]).generate_state(n)


def _draw_signals(cfg: dict, ds: datagen.Dataset, seed: int, contributors):
    sig = cfg["signals"]
    kind = sig["kind"]
    mask = ds.corrupt_mask
    tiers = None
    if kind == "none":
        v = r = np.ones(ds.n)
    elif kind == "scenario":
        v, r = signals.simulate_signals(mask, sig["scenario"], seed, sig.get("tables") or None, contributors)
    elif kind == "correlated":
        cs = signals.generate_correlated_signals(mask, sig["correlation"], seed)
        v, r = cs.v, cs.r
    else:
        rng = np.random.default_rng([seed, 0x713])
        tiers = np.full(ds.n, "attacker", dtype=object)
        honest = rng.permutation(np.flatnonzero(~mask))
        for i, name in enumerate(HONEST_TIERS):
            tiers[honest[i::len(HONEST_TIERS)]] = name
        ranges = sig.get("tier_ranges")
        v, r = signals.tier_signals(tiers, seed, {**signals.TIER_RANGES, **ranges} if ranges else None)
    bonus = sig.get("exploration_bonus")
    if bonus is not None:
        _, inverse, counts = np.unique(ds.contributor_id, return_inverse=True, return_counts=True)
        r = signals.exploration_bonus(r, counts[inverse], bonus.get("r_min", 0.4), bonus.get("n_first", 10))
    return np.asarray(v, dtype=np.float64), np.asarray(r, dtype=np.float64), tiers


def prepare_trial(cfg: dict, seeds):
    """Shared inputs for every method in one trial: data, signals and the warmup checkpoint."""
    dcfg, ccfg = cfg["dataset"], cfg["corruption"]
    ds = datagen.load_dataset(dcfg["source"], seed=int(seeds[0]), cap=dcfg["cap"])
    train_ds, test_ds = datagen.split(ds, dcfg["test_fraction"], int(seeds[1]))
    if dcfg["data_fraction"] < 1.0:
        train_ds = datagen.subsample(train_ds, dcfg["data_fraction"], int(seeds[2]))
    if dcfg["n_contributors"]:
        train_ds = datagen.assign_contributors(train_ds, dcfg["n_contributors"], int(seeds[3]))
    gran = ccfg["granularity"]
    contributors = train_ds.contributor_id if gran == "contributor" else None
    if cfg["attack"] is not None:
        a = cfg["attack"]
        spec = AttackSpec(a["strategy"], a["fake_fraction"], tuple(a["fake_v_range"]), tuple(a["fake_r_range"]),
                          a["gamma"])
        train_ds = datagen.designate_attackers(train_ds, ccfg["beta"], gran, int(seeds[4]))
        v, r, tiers = _draw_signals(cfg, train_ds, int(seeds[5]), contributors)
        train_ds, v, r = apply_attack(train_ds, v, r, spec, int(seeds[6]))
    else:
        plan = datagen.CorruptionPlan(ccfg["beta"], ccfg["style"], ccfg["subtle_fraction"])
        train_ds = datagen.inject_corruption(train_ds, plan, gran, int(seeds[4]))
        v, r, tiers = _draw_signals(cfg, train_ds, int(seeds[5]), contributors)
    if cfg["drift"] is not None:
        d = cfg["drift"]
        train_ds = datagen.inject_drift(train_ds, d["type"], d["rate"], d["n_periods"], int(seeds[6]))
    return train_ds, test_ds, v, r, tiers


def method_weights(method: str, q, v, r, T, cc: CombineConfig) -> WeightVector:
    use_T = cc.apply_T or method.endswith("+T")
    Tm = T if use_T else None
    if method in ("softmax", "softmax+T"):
        wv = softmax_blend(q, v, r, cc.alpha, cc.tau_s)
        return apply_temporal(wv, T) if use_T else wv
    if method in ("adaptive", "adaptive+T"):
        wv = two_stage_adaptive(q, v, r, cc.tau_h, cc.tau_c, cc.alpha, cc.tau_s)
        return apply_temporal(wv, T) if use_T and not wv.skip_selection else wv
    ones = np.ones(len(v))
    factors = {
        "krum": (q, ones, ones),
        "v_only": (ones, v, ones),
        "r_only": (ones, ones, r),
        "v×r": (ones, v, r),
        "q×v": (q, v, ones),
        "q×r": (q, ones, r),
        "q×v×r": (q, v, r),
        "multiplicative": (q, v, r),
    }
    if method not in factors:
        raise ValueError(f"no weighting rule for method {method!r}")
    return multiplicative(*factors[method], Tm)


def run_trial(cfg: dict, point: SweepPoint, trial: int) -> list[TrialResult]:
    """All methods of one trial on identical data, signals and warmup."""
    if cfg["experiment"] == "detectability":
        return _detectability_trial(cfg, point, trial)
    t0 = time.perf_counter()
    seeds = trial_seeds(cfg["base_seed"], point.index, trial)
    train_ds, test_ds, v, r, tiers = prepare_trial(cfg, seeds)
    mcfg = cfg["model"]
    cc = CombineConfig(**cfg["combine"])
    methods = cfg["methods"]
    clean = ~train_ds.corrupt_mask
    T = signals.temporal_decay(train_ds.age, cc.delta)

    q = None
    rho_c = None
    if USES_Q & set(methods):
        warm = train(train_ds, config=TrainConfig(epochs=mcfg["warmup_epochs"], learning_rate=mcfg["learning_rate"],
                                                  batch_size=mcfg["batch_size"], seed=int(seeds[7])))
        q = compute_q(warm, train_ds, KrumConfig(**cfg["krum"]))
        if cfg["signals"]["kind"] != "none":
            rho_c = pearson(q, v * r)
    if q is None:
        q = np.ones(train_ds.n)
    shared = time.perf_counter() - t0

    tcfg = TrainConfig(epochs=mcfg["epochs"], learning_rate=mcfg["learning_rate"], batch_size=mcfg["batch_size"],
                       seed=int(seeds[8]))
    cache: dict = {}

    def fit(kind: str, arr):
        key = (kind, None if arr is None else arr.tobytes())
        if key not in cache:
            if kind == "all":
                params = train(train_ds, config=tcfg)
            elif kind == "select":
                params = train(train_ds, indices=arr, config=tcfg)
            else:
                params = train(train_ds, weights=arr, config=tcfg)
            cache[key] = evaluate(params, test_ds)
        return cache[key]

    out = []
    everything = np.arange(train_ds.n)
    for method in methods:
        t1 = time.perf_counter()
        branch = NOT_APPLICABLE
        extra = {}
        if method == "uniform":
            selected = everything
            err = fit("all", None)
        else:
            wv = method_weights(method, q, v, r, T, cc)
            if method.startswith("adaptive"):
                branch = wv.gate.branch
                extra["min_s"] = wv.gate.min_s
            if wv.skip_selection:
                selected = everything
                err = fit("all", None)
            else:
                selected = weighted_select(wv.w, cc.keep_fraction)
                if mcfg["training"] == "sample":
                    err = fit("sample", wv.w)
                else:
                    err = fit("select", selected)
        precision = float(clean[selected].sum() / len(selected))
        extra["n_selected"] = int(len(selected))
        if tiers is not None:
            chosen = np.zeros(train_ds.n, dtype=bool)
            chosen[selected] = True
            for name in ("attacker",) + HONEST_TIERS:
                members = tiers == name
                if members.any():
                    extra[f"sel_{name}"] = float(chosen[members].mean())
        out.append(TrialResult(method, point, trial, int(seeds[0]), float(err), precision, branch, rho_c,
                               shared + time.perf_counter() - t1, extra))
    return out


def _detectability_trial(cfg: dict, point: SweepPoint, trial: int) -> list[TrialResult]:
    t0 = time.perf_counter()
    fed, ds, mcfg = cfg["federated"], cfg["dataset"], cfg["model"]
    cond = SweepCondition(cfg["corruption"]["subtle_fraction"], fed["beta_workers"], fed["n_workers"], cfg["trials"])
    settings = SweepSettings(source=ds["source"], subset_n=fed["subset_n"], test_fraction=ds["test_fraction"],
                             keep_fraction=fed["keep_fraction"], warmup_epochs=fed["warmup_epochs"],
                             epochs=mcfg["epochs"], learning_rate=mcfg["learning_rate"], score=fed["score"])
    key = [cfg["base_seed"], point.index, trial]
    res = detectability_trial(cond, settings, key)
    seed = int(np.random.SeedSequence(key).generate_state(1)[0])
    wall = time.perf_counter() - t0
    return [TrialResult(m, point, trial, seed, res[m]["error"], res[m]["precision"], wall_time=wall,
                        extra={"rho_d": res["rho_d"]})
            for m in DETECTABILITY_METHODS]


def _job(args):
    cfg, point, trial = args
    return run_trial(cfg, point, trial)


def run_experiment(config: ExperimentConfig, parallelism: int = 1, progress=None) -> ExperimentResult:
    """Run every (sweep point, trial) cell; results are sorted by point, method order and trial."""
    t0 = time.perf_counter()
    jobs = [(resolved, point, t) for point, resolved in config.points() for t in range(config.trials)]
    trials: list[TrialResult] = []
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for i, res in enumerate(pool.map(_job, jobs)):
                trials.extend(res)
                if progress:
                    progress(i + 1, len(jobs))
    else:
        for i, job in enumerate(jobs):
            trials.extend(_job(job))
            if progress:
                progress(i + 1, len(jobs))
    order = {m: i for i, m in enumerate(_method_order(config))}
    trials.sort(key=lambda t: (t.point.index, order.get(t.method, len(order)), t.trial))
    return ExperimentResult(config, trials, time.perf_counter() - t0)


def _method_order(config: ExperimentConfig) -> list[str]:
    if config["experiment"] == "detectability":
        return list(DETECTABILITY_METHODS)
    return config.methods
