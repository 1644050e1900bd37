"""Datasets, contributor assignment, corruption and drift injection.

Every operation is a pure function of its inputs and an integer seed and
returns a new :class:`Dataset`; nothing is modified in place.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"

CORRUPTION_STYLES = ("uniform_random_flip", "offset_flip", "subtle_nearest_class", "regression_shift")

FLIP_OFFSET = 5

# name -> (sklearn loader, task). Large sets are read from ANML_DATA_DIR.
_BUNDLED = {
    "wine": "load_wine",
    "breast_cancer": "load_breast_cancer",
    "digits": "load_digits",
}
_LARGE = ("covertype", "adult")
DEFAULT_CAP = 5000


class DatasetError(ValueError):
    """Malformed dataset input or an impossible request on a dataset."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    task: str
    contributor_id: np.ndarray
    age: np.ndarray
    corrupt_mask: np.ndarray
    n_classes: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.features.shape[0]
        if n < 2:
            raise DatasetError("a dataset needs at least 2 samples")
        for name in ("labels", "contributor_id", "age", "corrupt_mask"):
            if getattr(self, name).shape[0] != n:
                raise DatasetError(f"{name} has length {getattr(self, name).shape[0]}, expected {n}")
        if self.task == CLASSIFICATION:
            if self.n_classes < 2:
                raise DatasetError("classification needs at least 2 classes")
            if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
                raise DatasetError("class labels out of range")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        meta = {
            k: (v[idx] if isinstance(v, np.ndarray) and v.shape[:1] == (self.n,) else v)
            for k, v in self.metadata.items()
        }
        return replace(
            self,
            features=self.features[idx],
            labels=self.labels[idx],
            contributor_id=self.contributor_id[idx],
            age=self.age[idx],
            corrupt_mask=self.corrupt_mask[idx],
            metadata=meta,
        )

    def same_as(self, other: "Dataset") -> bool:
        return (
            self.task == other.task
            and self.n_classes == other.n_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.contributor_id, other.contributor_id)
            and np.array_equal(self.age, other.age)
            and np.array_equal(self.corrupt_mask, other.corrupt_mask)
        )


def standardize(x: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance columns; constant columns become all zero."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    centered = x - mean
    const = std < 1e-12
    std = np.where(const, 1.0, std)
    out = centered / std
    out[:, const] = 0.0
    return out


def _make_dataset(features, labels, task, n_classes, metadata) -> Dataset:
    n = features.shape[0]
    if task == CLASSIFICATION:
        labels = np.asarray(labels, dtype=np.int64)
    else:
        labels = np.asarray(labels, dtype=np.float64)
    return Dataset(
        features=standardize(features),
        labels=labels,
        task=task,
        contributor_id=np.arange(n, dtype=np.int64),
        age=np.zeros(n),
        corrupt_mask=np.zeros(n, dtype=bool),
        n_classes=n_classes,
        metadata=metadata,
    )


def _cap_rows(features, labels, extra, cap, seed):
    n = features.shape[0]
    if cap is None or n <= cap:
        return features, labels, extra, n
    rng = np.random.default_rng([seed, 0xCA9])
    keep = np.sort(rng.choice(n, size=cap, replace=False))
    extra = {k: v[keep] for k, v in extra.items()}
    return features[keep], labels[keep], extra, n


def read_csv(path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Parse a dataset CSV: numeric feature columns, a ``label`` column and
    optional ``contributor_id`` / ``age`` columns."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if "label" not in header:
            raise DatasetError(f"{path}: no 'label' column in header")
        special = {"label", "contributor_id", "age"}
        feat_cols = [i for i, h in enumerate(header) if h not in special]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            parsed = []
            for i, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DatasetError(
                        f"{path}: non-numeric value {cell!r} at row {lineno}, column {header[i]!r}"
                    ) from None
            rows.append(parsed)
    if len(rows) < 2:
        raise DatasetError(f"{path}: fewer than 2 data rows")
    data = np.asarray(rows)
    features = data[:, feat_cols]
    labels = data[:, header.index("label")]
    extra = {}
    for name in ("contributor_id", "age"):
        if name in header:
            extra[name] = data[:, header.index(name)]
    return features, labels, extra


def _labels_to_task(labels, task):
    if task is None:
        task = CLASSIFICATION if np.all(labels == np.round(labels)) else REGRESSION
    if task == REGRESSION:
        return labels.astype(np.float64), task, 0
    classes, encoded = np.unique(labels, return_inverse=True)
    return encoded.astype(np.int64), task, len(classes)


def make_synthetic(n=200, d=2, n_classes=2, separation=4.0, task=CLASSIFICATION, noise=0.1, seed=0):
    """Gaussian blobs (classification) or a noisy linear target (regression)."""
    rng = np.random.default_rng([seed, 0x5EED])
    if task == REGRESSION:
        x = rng.normal(size=(n, d))
        coef = rng.normal(size=d)
        y = x @ coef + noise * rng.normal(size=n)
        return x, y
    centers = rng.normal(size=(n_classes, d))
    centers *= separation / max(np.linalg.norm(centers, axis=1).min(), 1e-9)
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    x = centers[y] + rng.normal(size=(n, d))
    return x, y


def load_dataset(source, seed: int = 0, cap: int | None = None, task: str | None = None) -> Dataset:
    """Load a bundled dataset by name, a CSV file, or a synthetic spec dict.

    Large named datasets (``covertype``, ``adult``) are read from
    ``$ANML_DATA_DIR/<name>.csv`` and subsampled to ``cap`` rows
    (default 5000) with the cap recorded in ``metadata``.
    """
    meta = {"source": source if isinstance(source, str) else dict(source), "seed": seed}
    extra = {}
    if isinstance(source, dict):
        spec = dict(source)
        spec.pop("kind", None)
        t = spec.get("task", CLASSIFICATION)
        x, y = make_synthetic(seed=seed, **spec)
        if t == REGRESSION:
            return _make_dataset(x, y, REGRESSION, 0, meta)
        return _make_dataset(x, y, CLASSIFICATION, int(spec.get("n_classes", 2)), meta)

    name = str(source)
    if name in _BUNDLED:
        import sklearn.datasets

        bunch = getattr(sklearn.datasets, _BUNDLED[name])()
        x, y = bunch.data.astype(np.float64), bunch.target
    elif name in _LARGE:
        data_dir = os.environ.get("ANML_DATA_DIR")
        if not data_dir:
            raise FileNotFoundError(f"dataset {name!r} needs ANML_DATA_DIR pointing at a directory with {name}.csv")
        x, y, extra = read_csv(Path(data_dir) / f"{name}.csv")
        if cap is None:
            cap = DEFAULT_CAP
    else:
        path = Path(name)
        if not path.is_absolute() and not path.exists() and os.environ.get("ANML_DATA_DIR"):
            path = Path(os.environ["ANML_DATA_DIR"]) / name
        x, y, extra = read_csv(path)

    x, y, extra, n_full = _cap_rows(x, y, extra, cap, seed)
    if cap is not None:
        meta["cap"] = cap
        meta["n_full"] = n_full
    y, t, n_classes = _labels_to_task(np.asarray(y, dtype=np.float64), task)
    ds = _make_dataset(x, y, t, n_classes, meta)
    if "contributor_id" in extra:
        ds = replace(ds, contributor_id=extra["contributor_id"].astype(np.int64))
    if "age" in extra:
        ds = replace(ds, age=extra["age"].astype(np.float64))
    return ds


def split(dataset: Dataset, test_fraction: float = 0.3, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified (classification) or plain shuffled train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng([seed, 0x5417])
    n = dataset.n
    n_test = int(np.floor(test_fraction * n + 0.5))
    n_test = min(max(n_test, 1), n - 1)
    if dataset.task != CLASSIFICATION:
        perm = rng.permutation(n)
        test_idx = np.sort(perm[:n_test])
    else:
        classes, counts = np.unique(dataset.labels, return_counts=True)
        if counts.min() < 2:
            bad = classes[counts.argmin()]
            raise DatasetError(f"class {bad} has fewer than 2 samples; cannot stratify")
        # largest-remainder allocation so the total is exact
        quota = counts * n_test / n
        alloc = np.floor(quota).astype(int)
        order = np.argsort(-(quota - alloc), kind="stable")
        alloc[order[: n_test - alloc.sum()]] += 1
        alloc = np.clip(alloc, 1, counts - 1)
        test_parts = []
        for c, a in zip(classes, alloc):
            members = np.flatnonzero(dataset.labels == c)
            test_parts.append(rng.permutation(members)[:a])
        test_idx = np.sort(np.concatenate(test_parts))
    train_mask = np.ones(n, dtype=bool)
    train_mask[test_idx] = False
    return dataset.subset(np.flatnonzero(train_mask)), dataset.subset(test_idx)


def subsample(dataset: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """Keep a seeded ``fraction`` of samples (stratified for classification)."""
    if fraction >= 1.0:
        return dataset
    kept, _ = split(dataset, 1.0 - fraction, seed)
    return kept


def assign_contributors(dataset: Dataset, n_contributors: int, seed: int = 0) -> Dataset:
    """Partition samples into ``n_contributors`` groups whose sizes differ by at most one."""
    n = dataset.n
    if not 1 <= n_contributors <= n:
        raise DatasetError("n_contributors must be in [1, n]")
    rng = np.random.default_rng([seed, 0xC0DE])
    perm = rng.permutation(n)
    ids = np.empty(n, dtype=np.int64)
    ids[perm] = np.arange(n) % n_contributors
    return replace(dataset, contributor_id=ids, metadata={**dataset.metadata, "n_contributors": n_contributors})


@dataclass(frozen=True)
class CorruptionPlan:
    beta: float = 0.3
    style: str = "uniform_random_flip"
    subtle_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise DatasetError("beta must be in [0, 1]")
        if self.style not in CORRUPTION_STYLES:
            raise DatasetError(f"unknown corruption style {self.style!r}")
        if not 0.0 <= self.subtle_fraction <= 1.0:
            raise DatasetError("subtle_fraction must be in [0, 1]")


def class_centroids(features, labels, n_classes) -> np.ndarray:
    cents = np.zeros((n_classes, features.shape[1]))
    for c in range(n_classes):
        members = labels == c
        if members.any():
            cents[c] = features[members].mean(axis=0)
        else:
            cents[c] = np.nan
    return cents


def nearest_other_class(centroids: np.ndarray) -> np.ndarray:
    """For each class, the closest other class by centroid distance (ties to lower index)."""
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.einsum("ijk,ijk->ij", diff, diff)
    dist = np.where(np.isnan(dist), np.inf, dist)
    np.fill_diagonal(dist, np.inf)
    return np.argmin(dist, axis=1)


def random_other_label(labels, n_classes, rng) -> np.ndarray:
    """Uniformly random label different from each input label."""
    shift = rng.integers(1, n_classes, size=len(labels))
    return (labels + shift) % n_classes


def _pick_corrupted(dataset, beta, granularity, rng) -> np.ndarray:
    n = dataset.n
    if granularity == "sample":
        m = int(np.floor(beta * n + 0.5))
        idx = rng.choice(n, size=m, replace=False)
        mask = np.zeros(n, dtype=bool)
        mask[idx] = True
        return mask
    if granularity == "contributor":
        contributors = np.unique(dataset.contributor_id)
        m = int(np.floor(beta * len(contributors) + 0.5))
        bad = rng.choice(contributors, size=m, replace=False)
        return np.isin(dataset.contributor_id, bad)
    raise DatasetError(f"unknown granularity {granularity!r}")


def designate_attackers(dataset: Dataset, beta: float, granularity: str = "sample", seed: int = 0) -> Dataset:
    """Mark an exact ``beta`` share of samples (or contributors) as attackers without
    touching their labels; strategic attacks manipulate them later."""
    rng = np.random.default_rng([seed, 0xBAD])
    return replace(dataset, corrupt_mask=_pick_corrupted(dataset, beta, granularity, rng))


def inject_corruption(dataset: Dataset, plan: CorruptionPlan, granularity: str = "sample", seed: int = 0) -> Dataset:
    """Corrupt an exact number of samples (or contributors) and mark them.

    ``offset_flip`` with ``subtle_fraction > 0`` mixes the two flip styles:
    each corrupted sample is independently a nearest-class flip with
    probability ``subtle_fraction``, otherwise an offset flip.
    """
    rng = np.random.default_rng([seed, 0xBAD])
    style = plan.style
    if style == "regression_shift":
        if dataset.task != REGRESSION:
            raise DatasetError("regression_shift needs a regression dataset")
    elif dataset.task != CLASSIFICATION:
        raise DatasetError(f"{style} needs a classification dataset")

    if plan.beta == 0:
        return replace(dataset, corrupt_mask=np.zeros(dataset.n, dtype=bool))

    mask = _pick_corrupted(dataset, plan.beta, granularity, rng)
    idx = np.flatnonzero(mask)
    labels = dataset.labels.copy()
    meta = {**dataset.metadata, "corruption": {"beta": plan.beta, "style": style, "granularity": granularity}}

    if style == "regression_shift":
        sigma = dataset.labels.std()
        sign = rng.choice([-1.0, 1.0], size=len(idx))
        labels[idx] = labels[idx] + sign * 2.0 * sigma
        return replace(dataset, labels=labels, corrupt_mask=mask | dataset.corrupt_mask, metadata=meta)

    k = dataset.n_classes
    y = labels[idx]
    if style == "uniform_random_flip":
        labels[idx] = random_other_label(y, k, rng)
    else:
        clean = ~mask & ~dataset.corrupt_mask
        ref = clean if clean.any() else np.ones(dataset.n, dtype=bool)
        nearest = nearest_other_class(class_centroids(dataset.features[ref], dataset.labels[ref], k))
        if style == "subtle_nearest_class":
            subtle = np.ones(len(idx), dtype=bool)
        else:
            subtle = rng.random(len(idx)) < plan.subtle_fraction
        if FLIP_OFFSET % k == 0:
            obvious = random_other_label(y, k, rng)
            meta["warning"] = f"offset {FLIP_OFFSET} collides with {k} classes; fell back to uniform_random_flip"
        else:
            obvious = (y + FLIP_OFFSET) % k
        labels[idx] = np.where(subtle, nearest[y], obvious)
        meta["subtle_mask"] = np.isin(np.arange(dataset.n), idx[subtle])
    return replace(dataset, labels=labels, corrupt_mask=mask | dataset.corrupt_mask, metadata=meta)


def inject_drift(dataset: Dataset, drift_type: str, rate: float, n_periods: int = 5, seed: int = 0) -> Dataset:
    """Assign ages 0..n_periods-1 and apply label or feature drift that grows with age.

    Drifted samples are recorded in ``metadata['drift_mask']`` and are never
    added to ``corrupt_mask``.
    """
    if not 0.0 <= rate <= 1.0:
        raise DatasetError("drift rate must be in [0, 1]")
    if n_periods < 2:
        raise DatasetError("n_periods must be at least 2")
    if drift_type not in ("label", "feature"):
        raise DatasetError(f"unknown drift type {drift_type!r}")
    rng = np.random.default_rng([seed, 0xD21F])
    n = dataset.n
    perm = rng.permutation(n)
    age = np.empty(n)
    age[perm] = np.arange(n) % n_periods
    frac = age / (n_periods - 1)
    labels = dataset.labels.copy()
    features = dataset.features.copy()
    drifted = np.zeros(n, dtype=bool)

    if drift_type == "label":
        if dataset.task != CLASSIFICATION:
            raise DatasetError("label drift needs a classification dataset")
        drifted = rng.random(n) < rate * frac
        flipped = random_other_label(labels[drifted], dataset.n_classes, rng)
        labels[drifted] = flipped
    else:
        sigma = dataset.features.std(axis=0)
        dirs = rng.normal(size=(n_periods, dataset.d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        shift = (rate * frac)[:, None] * dirs[age.astype(int)] * sigma[None, :]
        features = features + shift
        drifted = (rate * frac) > 0

    meta = {**dataset.metadata, "drift": {"type": drift_type, "rate": rate, "n_periods": n_periods}, "drift_mask": drifted}
    return replace(dataset, features=features, labels=labels, age=age, metadata=meta)
