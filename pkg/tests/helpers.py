"""Small shared builders for the test modules."""

import numpy as np

from nidsopt.data import Dataset
from nidsopt.hyperopt import Categorical, IntRange, SearchSpace


def make_dataset(X, y, names=None) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    names = names or tuple(f"f{i}" for i in range(X.shape[1]))
    return Dataset(X, np.asarray(y, dtype=np.int64), tuple(names))


def grid_space():
    """10 x 5 mixed space, 50 candidates."""
    return SearchSpace([IntRange("a", 0, 9), Categorical("b", ("p", "q", "r", "s", "t"))])


def bowl_objective(seed):
    """Smooth injective score on :func:`grid_space` with a seeded peak.

    The ``1e-6`` flat-index term separates equidistant candidates; it is
    smaller than any distance step (0.005), so the peak stays unique.
    """
    rng = np.random.default_rng(seed)
    ca, cb = int(rng.integers(0, 10)), int(rng.integers(0, 5))

    def f(c):
        i, j = c["a"], "pqrst".index(c["b"])
        return 0.9 - 0.005 * ((i - ca) ** 2 + (j - cb) ** 2) + 1e-6 * (i * 5 + j)
    return f
