"""Genetic algorithm over the index encoding of a search space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import DataError
from .space import SearchSpace
from .trace import BudgetExhausted, Evaluator, OptimizationTrace


@dataclass(frozen=True)
class GaConfig:
    population: int = 20
    generations: int = 30
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    elitism: int = 1
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise DataError("population must be >= 2")
        if self.generations < 1:
            raise DataError("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DataError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elitism < self.population:
            raise DataError("elitism must be in [0, population)")


def rank_weights(fitness) -> tuple[np.ndarray, np.ndarray]:
    """Descending order (ties to the earlier individual) and rank-proportional
    selection probabilities: the best of ``P`` gets weight ``P``, the worst 1."""
    P = len(fitness)
    order = np.array(sorted(range(P), key=lambda i: (-fitness[i], i)))
    weights = np.empty(P)
    weights[order] = np.arange(P, 0, -1, dtype=np.float64)
    return order, weights / weights.sum()


def _avoid_duplicate(space, ev, child, siblings, rng, tries: int = 10):
    """Re-mutate one random gene while ``child`` repeats an evaluated
    candidate or a sibling, as long as unexplored candidates remain."""
    n_values = space.n_values
    taken = {tuple(s) for s in siblings}
    for _ in range(tries):
        if not (ev.seen(space.from_indices(child)) or tuple(child) in taken):
            break
        if len(ev.memo) + len(taken) >= space.size:
            break
        d = rng.integers(0, len(child))
        child = child.copy()
        child[d] = rng.integers(0, n_values[d])
    return child


def ga_optimize(space: SearchSpace, objective, cfg: GaConfig = GaConfig(),
                budget: int | None = None, initial_population=None) -> OptimizationTrace:
    """Generational GA with elitism, rank selection, uniform crossover and
    per-gene resampling mutation.

    With a non-zero mutation rate, a child that duplicates an evaluated
    candidate or a sibling is re-mutated (up to ten single-gene resamples)
    so the budget goes to unexplored candidates. Stops when generations run
    out, the budget is spent, or the incumbent has not improved for
    ``cfg.patience`` generations. Elites carry their fitness forward and are
    not re-evaluated.
    """
    budget = cfg.population * cfg.generations if budget is None else budget
    ev = Evaluator(space, objective, budget)
    rng = np.random.default_rng(cfg.seed)
    n_values = space.n_values
    P, D = cfg.population, space.dims

    if initial_population is None:
        pop = np.stack([rng.integers(0, n_values) for _ in range(P)])
    else:
        pop = np.array([space.to_indices(c) for c in initial_population], dtype=np.int64)
        if pop.shape != (P, D):
            raise DataError(f"initial population must hold {P} candidates")

    fitness = []
    try:
        for ind in pop:
            fitness.append(ev(space.from_indices(ind)))
    except BudgetExhausted:
        return ev.trace("ga", cfg.seed)
    fitness = np.array(fitness)
    best = fitness.max()
    stall = 0

    for _ in range(cfg.generations - 1):
        order, probs = rank_weights(fitness)
        elite = order[:cfg.elitism]
        children = []
        while len(children) < P - cfg.elitism:
            p1, p2 = rng.choice(P, size=2, p=probs)
            if rng.random() < cfg.crossover_rate:
                mask = rng.random(D) < 0.5
                child = np.where(mask, pop[p1], pop[p2])
            else:
                child = pop[p1].copy()
            mutate = rng.random(D) < cfg.mutation_rate
            if mutate.any():
                child[mutate] = rng.integers(0, n_values[mutate])
            if cfg.mutation_rate > 0:
                child = _avoid_duplicate(space, ev, child, children, rng)
            children.append(child)

        child_fit = []
        try:
            for child in children:
                child_fit.append(ev(space.from_indices(child)))
        except BudgetExhausted:
            break
        pop = np.vstack([pop[elite], np.array(children)]) if cfg.elitism else np.array(children)
        fitness = np.concatenate([fitness[elite], child_fit])
        if fitness.max() > best:
            best = fitness.max()
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    return ev.trace("ga", cfg.seed)
