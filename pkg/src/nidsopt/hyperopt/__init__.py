"""Hyper-parameter optimizers: random search, PSO, GA, BO-GP and BO-TPE."""

from ..data import DataError
from .ga import GaConfig, ga_optimize
from .gp import GpState, bo_gp_optimize, expected_improvement, gp_posterior
from .objective import CVObjective, evaluate_objective
from .pso import PsoConfig, pso_optimize, pso_position_update, pso_velocity_update
from .random_search import random_search
from .space import Categorical, IntRange, SearchSpace, knn_space, reference_space, rf_space
from .tpe import bo_tpe_optimize, tpe_split
from .trace import Evaluator, OptimizationTrace, Trial, read_jsonl

OPTIMIZERS = ("rs", "pso", "ga", "bo-gp", "bo-tpe")


def population_shape(budget: int) -> tuple[int, int]:
    """Population size and generation count that fit a proposal budget.

    Up to 20 individuals, and at least five generations where the budget
    allows it: 600 -> 20 x 30, 30 -> 6 x 5.
    """
    size = max(2, min(20, budget // 5))
    return size, max(1, budget // size)


def run_optimizer(name: str, space: SearchSpace, objective, budget: int, seed: int = 0,
                  **options) -> OptimizationTrace:
    """Run optimizer ``name`` with a common ``(budget, seed)`` signature.

    Extra ``options`` go to the PSO/GA config or the BO loop.
    """
    if name == "rs":
        return random_search(space, objective, budget, seed)
    if name == "pso":
        size, iters = population_shape(budget)
        cfg = PsoConfig(**{"swarm_size": size, "iterations": iters, "seed": seed, **options})
        return pso_optimize(space, objective, cfg, budget=budget)
    if name == "ga":
        size, gens = population_shape(budget)
        cfg = GaConfig(**{"population": size, "generations": gens, "seed": seed, **options})
        return ga_optimize(space, objective, cfg, budget=budget)
    if name == "bo-gp":
        return bo_gp_optimize(space, objective, budget, seed, **options)
    if name == "bo-tpe":
        return bo_tpe_optimize(space, objective, budget, seed, **options)
    raise DataError(f"unknown optimizer {name!r}; expected one of {', '.join(OPTIMIZERS)}")


__all__ = [
    "OPTIMIZERS", "Categorical", "CVObjective", "Evaluator", "GaConfig", "GpState", "IntRange",
    "OptimizationTrace", "PsoConfig", "SearchSpace", "Trial", "bo_gp_optimize",
    "bo_tpe_optimize", "evaluate_objective", "expected_improvement", "ga_optimize",
    "gp_posterior", "knn_space", "population_shape", "pso_optimize", "pso_position_update",
    "pso_velocity_update", "random_search", "read_jsonl", "reference_space", "rf_space",
    "run_optimizer", "tpe_split",
]
