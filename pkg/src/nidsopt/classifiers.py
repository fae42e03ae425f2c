"""K-nearest-neighbour and random-forest binary classifiers.

Both models expose ``predict(queries) -> labels`` and are immutable after
fitting. Models serialize to a versioned JSON document via
:func:`save_model` / :func:`load_model`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _tree_kernel as _kernel
from .data import DataError, Dataset

KNN = "knn"
RF = "rf"
GINI = "gini"
ENTROPY = "entropy"
CRITERIA = (GINI, ENTROPY)

MODEL_FORMAT = "nidsopt-model"
MODEL_VERSION = 1

@dataclass(frozen=True)
class HyperParams:
    variant: str
    knn_k: int = 5
    rf_trees: int = 100
    rf_criterion: str = GINI

    def __post_init__(self):
        if self.variant not in (KNN, RF):
            raise DataError(f"unknown classifier variant {self.variant!r}")
        if self.variant == KNN and self.knn_k < 1:
            raise DataError(f"knn_k must be >= 1, got {self.knn_k}")
        if self.variant == RF:
            if self.rf_trees < 1:
                raise DataError(f"rf_trees must be >= 1, got {self.rf_trees}")
            if self.rf_criterion not in CRITERIA:
                raise DataError(f"unknown split criterion {self.rf_criterion!r}")

    @classmethod
    def from_candidate(cls, variant: str, candidate: dict) -> "HyperParams":
        return cls(variant=variant, **{k: candidate[k] for k in
                                       ("knn_k", "rf_trees", "rf_criterion") if k in candidate})

    def as_dict(self) -> dict:
        if self.variant == KNN:
            return {"variant": KNN, "knn_k": self.knn_k}
        return {"variant": RF, "rf_trees": self.rf_trees, "rf_criterion": self.rf_criterion}


def impurity(class_counts, criterion: str = GINI) -> float:
    n0, n1 = class_counts
    total = n0 + n1
    if total <= 0:
        raise DataError("impurity of an empty node")
    return float(_impurity(np.array([n0], dtype=float), np.array([n1], dtype=float), criterion)[0])


def _impurity(n0: np.ndarray, n1: np.ndarray, criterion: str) -> np.ndarray:
    total = n0 + n1
    p1 = np.divide(n1, total, out=np.zeros_like(total, dtype=float), where=total > 0)
    p0 = 1.0 - p1
    if criterion == GINI:
        return 1.0 - p0 * p0 - p1 * p1
    if criterion == ENTROPY:
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -(np.where(p0 > 0, p0 * np.log2(p0), 0.0) + np.where(p1 > 0, p1 * np.log2(p1), 0.0))
        return h
    raise DataError(f"unknown split criterion {criterion!r}")


def _check_width(queries, width: int) -> np.ndarray:
    Q = np.asarray(queries, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[1] != width:
        raise DataError(f"query width {Q.shape[1]} does not match training width {width}")
    return Q


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int

    def predict(self, queries) -> np.ndarray:
        return knn_predict(self, queries)


def knn_fit(train: Dataset, k: int) -> KnnModel:
    if k < 1 or k > train.n_rows:
        raise DataError(f"k={k} invalid for {train.n_rows} training rows")
    return KnnModel(train.features, train.labels, int(k))


def knn_predict(m: KnnModel, queries, chunk: int = 256) -> np.ndarray:
    """Majority vote of the ``k`` nearest training rows.

    Distance ties go to the lower training index; vote ties go to the label
    of the single nearest neighbour.
    """
    Q = _check_width(queries, m.X.shape[1])
    X, y, k = m.X, m.y, m.k
    n_train = len(X)
    sq_train = (X * X).sum(axis=1)
    out = np.empty(len(Q), dtype=np.int64)
    margin = min(n_train, k + 8)
    for start in range(0, len(Q), chunk):
        block = Q[start:start + chunk]
        approx = (block * block).sum(axis=1)[:, None] + sq_train[None, :] - 2.0 * block @ X.T
        np.maximum(approx, 0.0, out=approx)
        if margin < n_train:
            kth = np.partition(approx, margin - 1, axis=1)[:, margin - 1]
        else:
            kth = approx.max(axis=1)
        for r in range(len(block)):
            # rescore a generous candidate set exactly; the expanded form is
            # only used to prune
            slack = 1e-9 * max(kth[r], 1.0)
            cand = np.flatnonzero(approx[r] <= kth[r] + slack)
            diff = X[cand] - block[r]
            exact = (diff * diff).sum(axis=1)
            order = np.lexsort((cand, exact))[:k]
            votes = y[cand[order]]
            ones = int(votes.sum())
            if 2 * ones > k:
                out[start + r] = 1
            elif 2 * ones < k:
                out[start + r] = 0
            else:
                out[start + r] = votes[0]
    return out


@dataclass(frozen=True)
class DecisionTree:
    """Array-backed binary tree. ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, 2) class counts

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_label(self) -> np.ndarray:
        # argmax keeps class 0 on equal counts
        return np.argmax(self.counts, axis=1).astype(np.int64)

    def predict(self, queries) -> np.ndarray:
        Q = np.asarray(queries, dtype=np.float64)
        node = np.zeros(len(Q), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = Q[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.leaf_label()[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["counts"], dtype=np.int64).reshape(-1, 2),
        )


def presort(X: np.ndarray) -> np.ndarray:
    """Row order per feature, shape ``(n_features, n_rows)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def tree_fit(sample: Dataset | tuple, criterion: str = GINI, feature_subsample: int | None = None,
             rng: np.random.Generator | None = None, min_samples_split: int = 2,
             weights: np.ndarray | None = None, sorted_rows: np.ndarray | None = None) -> DecisionTree:
    """Grow an unpruned tree by recursive best-split search.

    Each node draws ``feature_subsample`` features without replacement. If
    none of them yields an impurity decrease the remaining features are
    tried in the same random order before the node becomes a leaf. Among
    equal decreases the earliest drawn feature and lowest threshold win.

    ``weights`` are integer row multiplicities (a bootstrap sample without
    materialized duplicates); ``sorted_rows`` may pass a cached
    :func:`presort` of ``X``.
    """
    if isinstance(sample, Dataset):
        X, y = sample.features, sample.labels
    else:
        X, y = sample
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n_rows, n_feat = X.shape
    if n_rows == 0:
        raise DataError("cannot fit a tree on an empty sample")
    if criterion not in CRITERIA:
        raise DataError(f"unknown split criterion {criterion!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    fs = n_feat if feature_subsample is None else max(1, min(feature_subsample, n_feat))
    code = _kernel.GINI_CODE if criterion == GINI else _kernel.ENTROPY_CODE
    # the compiled kernel draws split features from its own generator,
    # seeded from the caller's stream
    kernel_seed = int(rng.integers(0, 2**32 - 1))
    w = np.ones(n_rows, np.int64) if weights is None else np.ascontiguousarray(weights, np.int64)
    if sorted_rows is None:
        sorted_rows = presort(X)
    return DecisionTree(*_kernel.grow_tree(X, y, w, sorted_rows, code, fs, min_samples_split,
                                           kernel_seed))


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple[DecisionTree, ...]
    criterion: str
    seed: int
    n_features: int

    def __post_init__(self):
        sizes = [t.n_nodes for t in self.trees]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        packed = (
            np.concatenate([t.feature for t in self.trees]),
            np.concatenate([t.threshold for t in self.trees]),
            np.concatenate([t.left for t in self.trees]),
            np.concatenate([t.right for t in self.trees]),
            np.concatenate([t.leaf_label() for t in self.trees]),
            offsets,
        )
        object.__setattr__(self, "_packed", packed)

    def predict(self, queries) -> np.ndarray:
        return rf_predict(self, queries)


def rf_fit(train: Dataset, hp: HyperParams, seed: int = 0) -> RandomForestModel:
    """Bagged ensemble of ``hp.rf_trees`` trees with ``ceil(sqrt(N))`` features per split.

    Tree ``t`` draws its bootstrap sample and split features from its own
    RNG stream seeded by ``(seed, t)``.
    """
    if hp.variant != RF:
        raise DataError("rf_fit needs random-forest hyper-parameters")
    m, n = train.features.shape
    fs = math.ceil(math.sqrt(n))
    X = np.ascontiguousarray(train.features)
    y = np.ascontiguousarray(train.labels, dtype=np.int64)
    order = presort(X)
    trees = []
    for t in range(hp.rf_trees):
        rng = np.random.default_rng((seed, t))
        boot = rng.integers(0, m, size=m)
        weights = np.bincount(boot, minlength=m)
        trees.append(tree_fit((X, y), hp.rf_criterion, fs, rng, weights=weights, sorted_rows=order))
    return RandomForestModel(tuple(trees), hp.rf_criterion, seed, n)


def rf_predict(m: RandomForestModel, queries) -> np.ndarray:
    """Majority vote over trees; an even split votes class 0."""
    Q = _check_width(queries, m.n_features)
    ones = _kernel.forest_votes(np.ascontiguousarray(Q), *m._packed)
    return (2 * ones > len(m.trees)).astype(np.int64)


def fit_model(train: Dataset, hp: HyperParams, seed: int = 0):
    if hp.variant == KNN:
        return knn_fit(train, hp.knn_k)
    return rf_fit(train, hp, seed)


def model_to_dict(model) -> dict:
    if isinstance(model, KnnModel):
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "variant": KNN, "k": model.k,
                "X": model.X.tolist(), "y": model.y.tolist()}
    if isinstance(model, RandomForestModel):
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "variant": RF,
                "criterion": model.criterion, "seed": model.seed, "n_features": model.n_features,
                "trees": [t.to_dict() for t in model.trees]}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT:
        raise DataError("not a model document")
    if d.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model version {d.get('version')}")
    if d["variant"] == KNN:
        X = np.array(d["X"], dtype=np.float64)
        return KnnModel(X, np.array(d["y"], dtype=np.int64), int(d["k"]))
    return RandomForestModel(tuple(DecisionTree.from_dict(t) for t in d["trees"]),
                             d["criterion"], int(d["seed"]), int(d["n_features"]))


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
