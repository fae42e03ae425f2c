"""Bayesian optimization with a tree-structured Parzen estimator."""

from __future__ import annotations

import math

import numpy as np

from ..data import DataError
from .gp import norm_cdf, unevaluated_pool
from .random_search import distinct_samples
from .space import Categorical, IntRange, SearchSpace
from .trace import Evaluator, OptimizationTrace, Trial


def tpe_split(trials, gamma: float = 0.25) -> tuple[list[Trial], list[Trial]]:
    """Best ``max(1, round(gamma * n))`` trials form the good set.

    Sorted by score descending; equal scores keep the earlier ``eval_index``
    first. Rounding is half-up.
    """
    trials = list(trials)
    if len(trials) < 2:
        raise DataError("tpe_split needs at least two trials")
    ranked = sorted(trials, key=lambda t: (-t.score, t.eval_index))
    n_good = max(1, int(math.floor(gamma * len(trials) + 0.5)))
    return ranked[:n_good], ranked[n_good:]


class IntParzen:
    """Mixture of Gaussians truncated to the index domain and integrated over
    unit cells, one component per observation.

    Each component's bandwidth is the larger of a tenth of the domain width
    and the wider gap to its neighbouring observations.
    """

    def __init__(self, indices, n_values: int):
        self.n = n_values
        width = max(n_values - 1, 1)
        c = np.sort(np.asarray(indices, dtype=np.float64))
        self.centers = c
        if len(c) == 0:
            self.bw = c
            return
        if len(c) == 1:
            gaps = np.array([float(width)])
        else:
            d = np.diff(c)
            left = np.concatenate([[0.0], d])
            right = np.concatenate([d, [0.0]])
            gaps = np.maximum(left, right)
        self.bw = np.maximum(gaps, width / 10.0)
        self.bw = np.maximum(self.bw, 1e-3)

    def pmf(self, j) -> np.ndarray:
        j = np.atleast_1d(np.asarray(j, dtype=np.float64))
        if len(self.centers) == 0:
            return np.full(len(j), 1.0 / self.n)
        c, b = self.centers[:, None], self.bw[:, None]
        cell = norm_cdf((j[None, :] + 0.5 - c) / b) - norm_cdf((j[None, :] - 0.5 - c) / b)
        total = norm_cdf((self.n - 0.5 - c) / b) - norm_cdf((-0.5 - c) / b)
        return (cell / total).mean(axis=0)

    def sample(self, rng: np.random.Generator) -> int:
        if len(self.centers) == 0:
            return int(rng.integers(0, self.n))
        i = rng.integers(0, len(self.centers))
        for _ in range(1000):
            v = rng.normal(self.centers[i], self.bw[i])
            if -0.5 <= v < self.n - 0.5:
                return int(np.clip(np.rint(v), 0, self.n - 1))
        return int(np.clip(np.rint(self.centers[i]), 0, self.n - 1))


class CategoricalParzen:
    """Category frequencies with add-one smoothing."""

    def __init__(self, indices, n_values: int):
        counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=n_values).astype(float)
        self.p = (counts + 1.0) / (counts.sum() + n_values)

    def pmf(self, j) -> np.ndarray:
        return self.p[np.atleast_1d(np.asarray(j, dtype=np.int64))]

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(self.p), p=self.p))


def fit_density(space: SearchSpace, trials) -> list:
    """Independent per-dimension densities over the trials' index encodings."""
    idx = np.array([space.to_indices(t.candidate) for t in trials], dtype=np.int64)
    idx = idx.reshape(len(trials), space.dims)
    out = []
    for d, p in enumerate(space.params):
        if isinstance(p, Categorical):
            out.append(CategoricalParzen(idx[:, d], p.n_values))
        elif isinstance(p, IntRange):
            out.append(IntParzen(idx[:, d], p.n_values))
    return out


def log_density(densities, indices: np.ndarray) -> np.ndarray:
    """Sum of per-dimension log pmfs for a ``(pool, dims)`` index matrix."""
    total = np.zeros(len(indices))
    for d, dens in enumerate(densities):
        total += np.log(np.maximum(dens.pmf(indices[:, d]), 1e-300))
    return total


def tpe_select(log_l, log_g) -> int:
    """Index maximizing ``l(x) / g(x)``; the first one on ties."""
    return int(np.argmax(np.asarray(log_l) - np.asarray(log_g)))


def bo_tpe_optimize(space: SearchSpace, objective, budget: int, seed: int = 0,
                    init_points: int = 5, gamma: float = 0.25,
                    pool_size: int = 24) -> OptimizationTrace:
    """TPE loop: split trials into good/bad, draw a pool from the good density
    and evaluate the member with the best density ratio.

    Already-evaluated candidates are removed from the pool while unexplored
    ones remain.
    """
    if budget < init_points:
        raise DataError(f"budget {budget} below the {init_points} initial random trials")
    ev = Evaluator(space, objective, budget)
    rng = np.random.default_rng(seed)
    for c in distinct_samples(space, rng, min(init_points, space.size)):
        ev(c)
    while ev.remaining > 0:
        unique = [t for t in ev.trials if not t.cached]
        if len(unique) < 2:
            ev(space.sample(rng))
            continue
        good, bad = tpe_split(unique, gamma)
        l_dens = fit_density(space, good)
        g_dens = fit_density(space, bad)
        pool = [space.from_indices([dens.sample(rng) for dens in l_dens]) for _ in range(pool_size)]
        pool = unevaluated_pool(space, ev, pool)
        idx = np.stack([space.to_indices(c) for c in pool])
        ev(pool[tpe_select(log_density(l_dens, idx), log_density(g_dens, idx))])
    return ev.trace("bo-tpe", seed)
