"""Seeded synthetic datasets for tests, demos and acceptance runs."""

from __future__ import annotations

import numpy as np

from .data import Dataset


def make_blobs(n_rows: int = 5000, minority_fraction: float = 0.1, n_features: int = 10,
               n_informative: int = 3, separation: float = 6.0, seed: int = 0) -> Dataset:
    """Two Gaussian blobs with unit variance whose centres lie ``separation``
    apart, the offset spread evenly over the first ``n_informative``
    features. Remaining features are pure noise. Class 1 is the minority.
    """
    rng = np.random.default_rng(seed)
    n_attack = int(round(n_rows * minority_fraction))
    y = np.zeros(n_rows, dtype=np.int64)
    y[rng.choice(n_rows, size=n_attack, replace=False)] = 1
    X = rng.standard_normal((n_rows, n_features))
    shift = separation / np.sqrt(n_informative)
    X[y == 1, :n_informative] += shift
    names = tuple(f"f{i}" for i in range(n_features))
    return Dataset(X, y, names)


def make_informative(n_rows: int = 1000, n_informative: int = 5, n_noise: int = 15,
                     seed: int = 0) -> Dataset:
    """Label is ``sum(features[:n_informative]) > 0``; the rest is independent noise."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, n_informative + n_noise))
    y = (X[:, :n_informative].sum(axis=1) > 0).astype(np.int64)
    names = tuple(f"f{i}" for i in range(X.shape[1]))
    return Dataset(X, y, names)
