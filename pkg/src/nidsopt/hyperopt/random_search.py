from __future__ import annotations

import numpy as np

from ..data import DataError
from .space import SearchSpace
from .trace import Evaluator, OptimizationTrace

# spaces up to this size are shuffled explicitly; larger ones use rejection
_ENUMERABLE = 1_000_000


def distinct_samples(space: SearchSpace, rng: np.random.Generator, n: int, exclude=()):
    """Up to ``n`` uniformly drawn candidates, distinct and not in ``exclude``."""
    excluded = {space.key(c) for c in exclude}
    out = []
    if space.size <= _ENUMERABLE:
        for flat in rng.permutation(space.size):
            if len(out) >= n:
                break
            c = space.candidate_at(flat)
            if space.key(c) not in excluded:
                out.append(c)
        return out
    seen = set(excluded)
    attempts = 0
    while len(out) < n and attempts < 100 * n:
        attempts += 1
        c = space.sample(rng)
        if space.key(c) not in seen:
            seen.add(space.key(c))
            out.append(c)
    return out


def random_search(space: SearchSpace, objective, budget: int, seed: int = 0) -> OptimizationTrace:
    """Uniform sampling, without replacement until the space is exhausted."""
    if space.size < 1:
        raise DataError("empty search space")
    ev = Evaluator(space, objective, budget)
    rng = np.random.default_rng(seed)
    for c in distinct_samples(space, rng, budget):
        ev(c)
    while ev.remaining > 0:
        ev(space.sample(rng))
    return ev.trace("rs", seed)
