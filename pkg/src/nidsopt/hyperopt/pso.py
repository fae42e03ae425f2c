"""Particle swarm optimization over the index encoding of a search space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import DataError
from .space import SearchSpace
from .trace import BudgetExhausted, Evaluator, OptimizationTrace


@dataclass(frozen=True)
class PsoConfig:
    """Swarm settings. ``v_max`` of None means half the domain width per dimension."""

    swarm_size: int = 20
    iterations: int = 30
    c1: float = 2.0
    c2: float = 2.0
    w: float = 1.0
    v_max: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise DataError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        if self.c1 <= 0 or self.c2 <= 0:
            raise DataError("c1 and c2 must be positive")


def pso_velocity_update(v, x, pbest, gbest, cfg: PsoConfig, r1, r2, v_max=None) -> np.ndarray:
    """``w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x)``, clamped to ``+-v_max``."""
    v, x, pbest, gbest = (np.asarray(a, dtype=np.float64) for a in (v, x, pbest, gbest))
    if not v.shape == x.shape == pbest.shape == gbest.shape:
        raise DataError("velocity, position and best vectors must share one dimension")
    new = cfg.w * v + cfg.c1 * np.asarray(r1) * (pbest - x) + cfg.c2 * np.asarray(r2) * (gbest - x)
    if v_max is None:
        v_max = cfg.v_max
    if v_max is not None:
        limit = np.broadcast_to(np.asarray(v_max, dtype=np.float64), new.shape)
        new = np.clip(new, -limit, limit)
    return new


def pso_position_update(x, v, upper) -> np.ndarray:
    """``x + v`` clamped to the index box ``[0, upper]``."""
    return np.clip(np.asarray(x, dtype=np.float64) + np.asarray(v, dtype=np.float64), 0.0, upper)


def pso_optimize(space: SearchSpace, objective, cfg: PsoConfig = PsoConfig(),
                 budget: int | None = None, init_positions=None) -> OptimizationTrace:
    """Synchronous global-best PSO.

    Positions live in the continuous index encoding and are decoded by
    rounding and clamping before evaluation. ``gbest`` is refreshed once per
    iteration from the particles' personal bests.
    """
    upper = space.upper()
    v_max = np.asarray(cfg.v_max if cfg.v_max is not None else upper / 2.0, dtype=np.float64)
    budget = cfg.swarm_size * cfg.iterations if budget is None else budget
    ev = Evaluator(space, objective, budget)
    rng = np.random.default_rng(cfg.seed)
    S, D = cfg.swarm_size, space.dims

    if init_positions is None:
        x = rng.uniform(0.0, 1.0, size=(S, D)) * upper
    else:
        x = np.array(init_positions, dtype=np.float64).reshape(S, D)
    v = rng.uniform(-1.0, 1.0, size=(S, D)) * v_max

    pbest = x.copy()
    pbest_score = np.full(S, -np.inf)
    try:
        for i in range(S):
            pbest_score[i] = ev(space.decode(x[i]))
        g = int(np.argmax(pbest_score))
        gbest = pbest[g].copy()
        for _ in range(cfg.iterations - 1):
            for i in range(S):
                r1 = rng.random(D)
                r2 = rng.random(D)
                v[i] = pso_velocity_update(v[i], x[i], pbest[i], gbest, cfg, r1, r2, v_max)
                x[i] = pso_position_update(x[i], v[i], upper)
                score = ev(space.decode(x[i]))
                if score > pbest_score[i]:
                    pbest_score[i] = score
                    pbest[i] = x[i].copy()
            g = int(np.argmax(pbest_score))
            gbest = pbest[g].copy()
    except BudgetExhausted:
        pass
    return ev.trace("pso", cfg.seed)
