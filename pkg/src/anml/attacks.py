"""Strategic adversaries layered on top of basic label corruption.

Attackers are designated first (``corrupt_mask`` on the incoming dataset),
external signals are drawn for that honesty status, and only then are labels,
features and credentials manipulated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datagen import CLASSIFICATION, Dataset, DatasetError, class_centroids, random_other_label

STRATEGIES = ("naive_flip", "credential_faking", "gradient_aligned", "joint")


@dataclass(frozen=True)
class AttackSpec:
    strategy: str = "joint"
    fake_fraction: float = 0.6
    fake_v_range: tuple = (0.70, 0.90)
    fake_r_range: tuple = (0.65, 0.85)
    gamma: float = 0.5

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown attack strategy {self.strategy!r}")
        for rng in (self.fake_v_range, self.fake_r_range):
            if not 0.0 <= rng[0] <= rng[1] <= 1.0:
                raise ValueError("credential ranges must lie within [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.fake_fraction <= 1.0:
            raise ValueError("fake_fraction must be in [0, 1]")


def fake_credentials(v, r, attacker_mask, spec: AttackSpec, seed: int = 0):
    """Give a seeded ``fake_fraction`` of attackers high ``v`` and ``r``."""
    v = np.array(v, dtype=np.float64)
    r = np.array(r, dtype=np.float64)
    mask = np.asarray(attacker_mask, dtype=bool)
    if not (len(v) == len(r) == len(mask)):
        raise ValueError("length mismatch between signals and attacker mask")
    rng = np.random.default_rng([seed, 0xFA4E])
    attackers = np.flatnonzero(mask)
    m = int(np.floor(spec.fake_fraction * len(attackers) + 0.5))
    fakers = rng.choice(attackers, size=m, replace=False)
    lo, hi = spec.fake_v_range
    v[fakers] = rng.uniform(lo, hi, size=m)
    lo, hi = spec.fake_r_range
    r[fakers] = rng.uniform(lo, hi, size=m)
    return v, r


def gradient_align(dataset: Dataset, attacker_mask, gamma: float = 0.5, seed: int = 0) -> Dataset:
    """Relabel each attacker sample to its nearest other class centroid and pull its
    features toward that centroid: ``x' = x + gamma * (mu_target - x)``.

    Centroids come from the non-attacker samples.
    """
    if dataset.task != CLASSIFICATION:
        raise DatasetError("gradient alignment needs a classification dataset")
    mask = np.asarray(attacker_mask, dtype=bool)
    honest = ~mask
    if len(np.unique(dataset.labels[honest])) < 2:
        raise DatasetError("gradient alignment needs at least two classes among honest samples")
    cents = class_centroids(dataset.features[honest], dataset.labels[honest], dataset.n_classes)
    idx = np.flatnonzero(mask)
    x = dataset.features[idx]
    y = dataset.labels[idx]
    diff = x[:, None, :] - cents[None, :, :]
    dist = np.einsum("ijk,ijk->ij", diff, diff)
    dist = np.where(np.isnan(dist), np.inf, dist)
    dist[np.arange(len(idx)), y] = np.inf
    target = np.argmin(dist, axis=1)
    features = dataset.features.copy()
    labels = dataset.labels.copy()
    features[idx] = x + gamma * (cents[target] - x)
    labels[idx] = target
    meta = {**dataset.metadata, "attack_targets": target}
    return replace(dataset, features=features, labels=labels, corrupt_mask=dataset.corrupt_mask | mask, metadata=meta)


def apply_attack(dataset: Dataset, v, r, spec: AttackSpec, seed: int = 0):
    """Run ``spec.strategy`` against the attackers marked in ``dataset.corrupt_mask``.

    ``v`` and ``r`` must already reflect that honesty status. Returns the
    attacked dataset and the (possibly faked) signals.
    """
    mask = dataset.corrupt_mask.copy()
    if len(v) != dataset.n or len(r) != dataset.n:
        raise ValueError("signal length does not match dataset")
    if spec.strategy in ("naive_flip", "credential_faking"):
        rng = np.random.default_rng([seed, 0xF11B])
        labels = dataset.labels.copy()
        labels[mask] = random_other_label(labels[mask], dataset.n_classes, rng)
        attacked = replace(dataset, labels=labels)
    else:
        attacked = gradient_align(dataset, mask, spec.gamma, seed)
    v2, r2 = np.array(v, dtype=np.float64), np.array(r, dtype=np.float64)
    if spec.strategy in ("credential_faking", "joint"):
        v2, r2 = fake_credentials(v2, r2, mask, spec, seed)
    return attacked, v2, r2
