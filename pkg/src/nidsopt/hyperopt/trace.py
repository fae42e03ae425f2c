"""Trials, optimization traces and the budgeted, memoizing evaluator."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..data import DataError
from .space import SearchSpace


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class Trial:
    candidate: dict
    score: float
    eval_index: int
    wall_time: float = 0.0
    cached: bool = False

    def as_dict(self) -> dict:
        return {"eval_index": self.eval_index, "candidate": self.candidate,
                "score": self.score, "wall_time": self.wall_time, "cached": self.cached}


@dataclass(frozen=True)
class OptimizationTrace:
    trials: tuple[Trial, ...]
    optimizer: str
    seed: int
    budget: int

    @property
    def best(self) -> Trial:
        if not self.trials:
            raise DataError("empty trace")
        best = self.trials[0]
        for t in self.trials[1:]:
            if t.score > best.score:
                best = t
        return best

    @property
    def budget_used(self) -> int:
        return len(self.trials)

    @property
    def n_evaluations(self) -> int:
        """Proposals that actually ran the objective (memo hits excluded)."""
        return sum(1 for t in self.trials if not t.cached)

    def incumbent_scores(self) -> list[float]:
        out, best = [], float("-inf")
        for t in self.trials:
            best = max(best, t.score)
            out.append(best)
        return out

    def summary(self) -> dict:
        b = self.best
        return {"optimizer": self.optimizer, "seed": self.seed, "budget": self.budget,
                "budget_used": self.budget_used, "evaluations": self.n_evaluations,
                "best_candidate": b.candidate, "best_score": b.score,
                "best_eval_index": b.eval_index}

    def write_jsonl(self, path, include_time: bool = True) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for t in self.trials:
                d = t.as_dict()
                if not include_time:
                    d.pop("wall_time")
                fh.write(json.dumps(d) + "\n")

    def write_csv(self, path, include_time: bool = True) -> None:
        names = list(self.trials[0].candidate) if self.trials else []
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eval_index", *names, "score", "cached"] + (["wall_time"] if include_time else []))
            for t in self.trials:
                row = [t.eval_index, *[t.candidate[n] for n in names], repr(t.score), int(t.cached)]
                if include_time:
                    row.append(f"{t.wall_time:.3f}")
                w.writerow(row)


def read_jsonl(path, optimizer: str = "", seed: int = 0) -> OptimizationTrace:
    trials = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            trials.append(Trial(d["candidate"], d["score"], d["eval_index"],
                                d.get("wall_time", 0.0), d.get("cached", False)))
    return OptimizationTrace(tuple(trials), optimizer, seed, len(trials))


@dataclass
class Evaluator:
    """Wraps an objective with budget accounting and per-run memoization.

    Every proposal consumes one budget unit, memo hits included, so traces
    from different optimizers stay comparable.
    """

    space: SearchSpace
    objective: object
    budget: int
    trials: list = field(default_factory=list)
    memo: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.budget < 1:
            raise DataError(f"budget must be >= 1, got {self.budget}")

    @property
    def remaining(self) -> int:
        return self.budget - len(self.trials)

    def seen(self, candidate: dict) -> bool:
        return self.space.key(candidate) in self.memo

    @property
    def exhausted_space(self) -> bool:
        return len(self.memo) >= self.space.size

    def __call__(self, candidate: dict) -> float:
        if self.remaining <= 0:
            raise BudgetExhausted
        if not self.space.contains(candidate):
            raise DataError(f"candidate {candidate} outside the search space")
        key = self.space.key(candidate)
        start = time.perf_counter()
        cached = key in self.memo
        if cached:
            score = self.memo[key]
        else:
            score = float(self.objective(dict(candidate)))
            if not 0.0 <= score <= 1.0:
                raise DataError(f"objective returned {score}, outside [0, 1]")
            self.memo[key] = score
        elapsed = time.perf_counter() - start
        self.trials.append(Trial(dict(candidate), score, len(self.trials), elapsed, cached))
        return score

    def trace(self, optimizer: str, seed: int) -> OptimizationTrace:
        return OptimizationTrace(tuple(self.trials), optimizer, seed, self.budget)
