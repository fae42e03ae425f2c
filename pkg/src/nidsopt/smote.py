"""Synthetic minority oversampling (SMOTE)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset


@dataclass(frozen=True)
class SmoteConfig:
    """Oversampling settings.

    ``target_minority_count`` of None balances the minority class up to the
    majority count.
    """

    k: int = 5
    target_minority_count: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise DataError(f"SMOTE k must be >= 1, got {self.k}")
        if self.target_minority_count is not None and self.target_minority_count < 1:
            raise DataError("target_minority_count must be positive")


def interpolate(x_inst, x_j, r):
    """One synthetic point on the segment from ``x_inst`` towards ``x_j``."""
    x_inst = np.asarray(x_inst, dtype=np.float64)
    return x_inst + r * (np.asarray(x_j, dtype=np.float64) - x_inst)


def minority_class(labels) -> int:
    ones = int(np.sum(labels))
    zeros = len(labels) - ones
    return 0 if zeros < ones else 1


def nearest_minority_neighbors(X_min: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows for every row of ``X_min``.

    Euclidean distance, ties to the lower row index. When ``k`` exceeds the
    number of other rows every other row is returned.
    """
    m = len(X_min)
    k = min(k, m - 1)
    out = np.empty((m, k), dtype=np.int64)
    for i in range(m):
        dist = np.sqrt(((X_min - X_min[i]) ** 2).sum(axis=1))
        dist[i] = np.inf
        out[i] = np.argsort(dist, kind="stable")[:k]
    return out


def oversample(train: Dataset, cfg: SmoteConfig = SmoteConfig()) -> Dataset:
    """Append synthetic minority rows until the minority reaches its target.

    Base instances are cycled round-robin over the minority rows; synthetic
    row ``s`` uses base ``s % m``. Each base instance draws from its own RNG
    stream seeded by ``(cfg.seed, base index)``, so results do not depend on
    evaluation order. Original rows come first and are left untouched.
    """
    zeros, ones = train.class_counts()
    if zeros == 0 or ones == 0:
        raise DataError("SMOTE needs both classes in the training set")
    cls = minority_class(train.labels)
    min_idx = np.flatnonzero(train.labels == cls)
    m = len(min_idx)
    target = cfg.target_minority_count
    if target is None:
        target = max(zeros, ones)
    if target < m:
        raise DataError(f"target minority count {target} below current count {m}")
    needed = target - m
    if needed == 0:
        return train
    if m < 2:
        raise DataError("minority class has a single instance; no neighbour exists")

    X_min = train.features[min_idx]
    neigh = nearest_minority_neighbors(X_min, cfg.k)
    kk = neigh.shape[1]
    synth = np.empty((needed, train.n_features))
    per_base = [(needed - b + m - 1) // m for b in range(m)]
    for b in range(m):
        count = per_base[b]
        if count == 0:
            continue
        rng = np.random.default_rng((cfg.seed, b))
        picks = rng.integers(0, kk, size=count)
        r = rng.random(count)
        for t in range(count):
            synth[t * m + b] = interpolate(X_min[b], X_min[neigh[b, picks[t]]], r[t])

    X = np.vstack([train.features, synth])
    y = np.concatenate([train.labels, np.full(needed, cls, dtype=np.int64)])
    return Dataset(X, y, train.feature_names)
