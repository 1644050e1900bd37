"""External quality signals: verification ``v``, reputation ``r``, temporal decay ``T``.

Scenario tables are plain data (see ``DEFAULT_SCENARIOS``) so any band can be
overridden from the harness config. Each role/factor entry reads
``{"p_high": p, "high": [lo, hi], "low": [lo, hi]}``: with probability ``p``
the value is drawn from the high band, otherwise from the low band. A role with
``"joint": true`` makes one draw that decides the band for ``v`` and ``r``
together.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

SCENARIOS = ("high", "moderate", "low", "adversarial")

_ATTACKER_LOW_V = [0.10, 0.25]
_ATTACKER_LOW_R = [0.15, 0.35]

DEFAULT_SCENARIOS = {
    "high": {
        "honest": {
            "v": {"p_high": 0.80, "high": [0.75, 0.90], "low": [0.60, 0.75]},
            "r": {"p_high": 0.60, "high": [0.70, 0.90], "low": [0.60, 0.75]},
        },
        "corrupt": {
            "v": {"p_high": 0.0, "high": _ATTACKER_LOW_V, "low": _ATTACKER_LOW_V},
            "r": {"p_high": 0.0, "high": _ATTACKER_LOW_R, "low": _ATTACKER_LOW_R},
        },
    },
    "moderate": {
        "honest": {
            "v": {"p_high": 0.70, "high": [0.70, 0.85], "low": [0.60, 0.75]},
            "r": {"p_high": 0.50, "high": [0.65, 0.85], "low": [0.60, 0.75]},
        },
        "corrupt": {
            "v": {"p_high": 0.20, "high": [0.40, 0.55], "low": _ATTACKER_LOW_V},
            "r": {"p_high": 0.25, "high": [0.40, 0.55], "low": _ATTACKER_LOW_R},
        },
    },
    "low": {
        "honest": {
            "v": {"p_high": 0.60, "high": [0.65, 0.80], "low": [0.45, 0.60]},
            "r": {"p_high": 0.40, "high": [0.55, 0.80], "low": [0.45, 0.60]},
        },
        "corrupt": {
            "v": {"p_high": 0.40, "high": [0.45, 0.60], "low": _ATTACKER_LOW_V},
            "r": {"p_high": 0.35, "high": [0.45, 0.60], "low": _ATTACKER_LOW_R},
        },
    },
    "adversarial": {
        "honest": {
            "v": {"p_high": 0.55, "high": [0.50, 0.70], "low": [0.30, 0.50]},
            "r": {"p_high": 0.55, "high": [0.50, 0.70], "low": [0.30, 0.50]},
        },
        "corrupt": {
            "joint": True,
            "v": {"p_high": 0.40, "high": [0.65, 0.85], "low": [0.20, 0.40]},
            "r": {"p_high": 0.40, "high": [0.60, 0.80], "low": [0.20, 0.40]},
        },
    },
}

TIER_RANGES = {
    "attacker": {"v": _ATTACKER_LOW_V, "r": _ATTACKER_LOW_R},
    "novice": {"v": [0.40, 0.60], "r": [0.30, 0.50]},
    "intermediate": {"v": [0.60, 0.75], "r": [0.50, 0.70]},
    "expert": {"v": [0.80, 0.95], "r": [0.80, 0.95]},
    "generic_honest": {"v": [0.70, 0.85], "r": [0.65, 0.85]},
}
TIERS = tuple(TIER_RANGES)


@dataclass(frozen=True)
class ContributorProfile:
    id: int
    honest: bool
    tier: str
    v: float
    r: float
    contribution_count: int = 0

    def __post_init__(self):
        if not (0.0 <= self.v <= 1.0 and 0.0 <= self.r <= 1.0):
            raise ValueError("v and r must lie in [0, 1]")
        if self.tier not in TIER_RANGES:
            raise ValueError(f"unknown tier {self.tier!r}")


@dataclass(frozen=True, eq=False)
class SignalSet:
    q: np.ndarray
    v: np.ndarray
    r: np.ndarray
    T: np.ndarray

    @property
    def s(self) -> np.ndarray:
        return self.v * self.r

    def __post_init__(self):
        n = len(self.q)
        for name in ("v", "r", "T"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"signal {name} has wrong length")
        for name in ("q", "v", "r", "T"):
            vals = getattr(self, name)
            if np.any(vals < 0) or np.any(vals > 1):
                raise ValueError(f"signal {name} outside [0, 1]")


@dataclass(frozen=True)
class TemporalContext:
    w_src: float
    w_dest: float
    w_rel: float
    delta_src: float
    delta_dest: float
    delta_rel: float

    def __post_init__(self):
        ws = (self.w_src, self.w_dest, self.w_rel)
        if min(ws) < 0 or abs(sum(ws) - 1.0) > 1e-12:
            raise ValueError("context weights must be non-negative and sum to 1")
        if min(self.delta_src, self.delta_dest, self.delta_rel) < 0:
            raise ValueError("decay rates must be non-negative")


def scenario_table(scenario: str, overrides: dict | None = None) -> dict:
    """The band table for ``scenario`` with any nested ``overrides`` merged in."""
    if scenario not in DEFAULT_SCENARIOS and not (overrides and scenario in overrides):
        raise ValueError(f"unknown scenario {scenario!r}")
    table = copy.deepcopy(DEFAULT_SCENARIOS.get(scenario, {}))
    if overrides and scenario in overrides:
        _merge(table, overrides[scenario])
    return table


def _merge(base: dict, extra: dict) -> None:
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            _merge(base[key], val)
        else:
            base[key] = copy.deepcopy(val)


def _draw_role(role: dict, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    out = []
    shared = rng.random(m) if role.get("joint") else None
    for factor in ("v", "r"):
        spec = role[factor]
        pick = shared if shared is not None else rng.random(m)
        high = pick < spec["p_high"]
        lo = np.where(high, spec["high"][0], spec["low"][0])
        hi = np.where(high, spec["high"][1], spec["low"][1])
        out.append(lo + (hi - lo) * rng.random(m))
    return out[0], out[1]


def simulate_signals(corrupt_mask, scenario: str = "moderate", seed: int = 0, tables: dict | None = None,
                     contributor_id=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(v, r)`` for every sample from the scenario's bands.

    With ``contributor_id`` the draw is made once per contributor (a
    contributor is honest only if none of its samples is corrupt) and shared by
    its samples.
    """
    corrupt_mask = np.asarray(corrupt_mask, dtype=bool)
    table = scenario_table(scenario, tables)
    rng = np.random.default_rng([seed, 0x516])
    if contributor_id is None:
        units = corrupt_mask
        inverse = np.arange(len(corrupt_mask))
    else:
        ids, inverse = np.unique(np.asarray(contributor_id), return_inverse=True)
        units = np.zeros(len(ids), dtype=bool)
        np.logical_or.at(units, inverse, corrupt_mask)
    v = np.empty(len(units))
    r = np.empty(len(units))
    for role, sel in (("honest", ~units), ("corrupt", units)):
        v[sel], r[sel] = _draw_role(table[role], int(sel.sum()), rng)
    return v[inverse], r[inverse]


def tier_signals(tiers, seed: int = 0, ranges: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(v, r)`` uniformly from each sample's tier band."""
    ranges = ranges or TIER_RANGES
    tiers = np.asarray(tiers)
    rng = np.random.default_rng([seed, 0x7135])
    u_v = rng.random(len(tiers))
    u_r = rng.random(len(tiers))
    v = np.empty(len(tiers))
    r = np.empty(len(tiers))
    for name in np.unique(tiers):
        if name not in ranges:
            raise ValueError(f"unknown tier {name!r}")
        sel = tiers == name
        (vl, vh), (rl, rh) = ranges[name]["v"], ranges[name]["r"]
        v[sel] = vl + (vh - vl) * u_v[sel]
        r[sel] = rl + (rh - rl) * u_r[sel]
    return v, r


def _pearson(a, b) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / den) if den > 0 else 0.0


@dataclass(frozen=True, eq=False)
class CorrelatedSignals:
    s: np.ndarray
    v: np.ndarray
    r: np.ndarray
    mix: float
    achieved_rho: float
    clamped: bool


def generate_correlated_signals(corrupt_mask, target_rho: float, seed: int = 0, iters: int = 50) -> CorrelatedSignals:
    """External signal ``s`` whose Pearson correlation with cleanliness is ``target_rho``.

    Each sample takes an informative value (clean high, corrupt low) with
    probability ``mix`` and an independent uniform value otherwise. ``mix`` is
    found by bisection on the realized correlation with the random draws held
    fixed. ``v = r = sqrt(s)``.
    """
    mask = np.asarray(corrupt_mask, dtype=bool)
    if not 0.0 <= target_rho <= 1.0:
        raise ValueError("target_rho must be in [0, 1]")
    if mask.all() or not mask.any():
        raise ValueError("both clean and corrupt samples are required")
    clean = (~mask).astype(float)
    rng = np.random.default_rng([seed, 0xC022])
    n = len(mask)
    informative = np.where(mask, 0.2 * rng.random(n), 0.8 + 0.2 * rng.random(n))
    noise = rng.random(n)
    gate = rng.random(n)

    def realize(p):
        return np.where(gate < p, informative, noise)

    rho_hi = _pearson(realize(1.0), clean)
    clamped = target_rho > min(rho_hi, 0.995)
    if clamped:
        p = 1.0
    else:
        lo, hi = 0.0, 1.0
        if _pearson(realize(0.0), clean) >= target_rho:
            hi = 0.0
        for _ in range(iters):
            if hi - lo < 1e-12:
                break
            mid = 0.5 * (lo + hi)
            if _pearson(realize(mid), clean) < target_rho:
                lo = mid
            else:
                hi = mid
        p = hi
    s = realize(p)
    root = np.sqrt(s)
    return CorrelatedSignals(s=s, v=root, r=root.copy(), mix=p, achieved_rho=_pearson(s, clean), clamped=clamped)


def temporal_decay(ages, delta: float) -> np.ndarray:
    ages = np.asarray(ages, dtype=np.float64)
    if np.any(ages < 0) or delta < 0:
        raise ValueError("ages and delta must be non-negative")
    return np.exp(-delta * ages)


def context_decay(dt, ctx: TemporalContext):
    """Convex mix of source, destination and relationship decay curves."""
    dt = np.asarray(dt, dtype=np.float64)
    if np.any(dt < 0):
        raise ValueError("elapsed time must be non-negative")
    out = (
        ctx.w_src * np.exp(-ctx.delta_src * dt)
        + ctx.w_dest * np.exp(-ctx.delta_dest * dt)
        + ctx.w_rel * np.exp(-ctx.delta_rel * dt)
    )
    return float(out) if out.ndim == 0 else out


def exploration_bonus(r, counts, r_min: float = 0.4, n_first: int = 10) -> np.ndarray:
    """Raise reputation to ``r_min`` for contributors with fewer than ``n_first`` contributions."""
    r = np.asarray(r, dtype=np.float64)
    counts = np.asarray(counts)
    if np.any(counts < 0):
        raise ValueError("contribution counts must be non-negative")
    return np.where(counts < n_first, np.maximum(r, r_min), r)
