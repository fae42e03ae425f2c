"""Cross-validated accuracy as the hyper-parameter objective."""

from __future__ import annotations

from ..classifiers import HyperParams
from ..data import DataError, Dataset
from ..evaluation import kfold_cv


def evaluate_objective(candidate: dict, train: Dataset, variant: str,
                       folds: int = 3, seed: int = 0) -> float:
    """Mean ``folds``-fold CV accuracy of the classifier built from ``candidate``."""
    if folds < 2:
        raise DataError(f"need at least 2 folds, got {folds}")
    if folds > train.n_rows:
        raise DataError(f"{folds} folds requested for {train.n_rows} rows")
    support = min(train.class_counts())
    if folds > support:
        raise DataError(f"{folds} folds exceed the smaller class support ({support} rows)")
    return kfold_cv(train, HyperParams.from_candidate(variant, candidate), folds, seed)


class CVObjective:
    """Callable objective bound to one training set; counts real evaluations."""

    def __init__(self, train: Dataset, variant: str, folds: int = 3, seed: int = 0):
        self.train = train
        self.variant = variant
        self.folds = folds
        self.seed = seed
        self.calls = 0

    def __call__(self, candidate: dict) -> float:
        self.calls += 1
        return evaluate_objective(candidate, self.train, self.variant, self.folds, self.seed)
