"""Information-gain (IGBFS) and correlation-based (CBFS) feature selection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DataError, Dataset

IGBFS = "igbfs"
CBFS = "cbfs"


@dataclass(frozen=True)
class DiscretizationSpec:
    bins: int = 10
    strategy: str = "equal-frequency"

    def __post_init__(self):
        if self.bins < 2:
            raise DataError(f"need at least 2 bins, got {self.bins}")
        if self.strategy != "equal-frequency":
            raise DataError(f"unsupported discretization strategy {self.strategy!r}")


@dataclass(frozen=True)
class TopK:
    k: int

    def cut(self, ranked_scores) -> int:
        return min(self.k, len(ranked_scores))


@dataclass(frozen=True)
class RelativeThreshold:
    """Keep features scoring at least ``fraction * max_score``."""

    fraction: float = 0.01

    def cut(self, ranked_scores) -> int:
        if len(ranked_scores) == 0 or ranked_scores[0] <= 0:
            return 0
        limit = self.fraction * ranked_scores[0]
        return int(sum(1 for s in ranked_scores if s >= limit))


def parse_policy(text: str):
    """``top:31`` or ``threshold:0.01``."""
    kind, _, value = text.strip().partition(":")
    if kind == "top":
        return TopK(int(value))
    if kind == "threshold":
        return RelativeThreshold(float(value) if value else 0.01)
    raise DataError(f"unknown selection policy {text!r}")


@dataclass(frozen=True)
class FeatureScore:
    feature_index: int
    score: float


@dataclass(frozen=True)
class SelectionResult:
    method: str
    selected: tuple[int, ...]
    scores: tuple[FeatureScore, ...]
    feature_names: tuple[str, ...] = ()
    config: dict = field(default_factory=dict)

    @property
    def selected_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.selected]

    def ranked(self) -> list[FeatureScore]:
        return sorted(self.scores, key=lambda s: (-s.score, s.feature_index))


def entropy(labels) -> float:
    """Shannon entropy in bits of a discrete vector."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("entropy of an empty vector")
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def discretize(x, disc: DiscretizationSpec = DiscretizationSpec()) -> np.ndarray:
    """Integer bin ids for a column.

    Columns with at most ``disc.bins`` distinct values keep one bin per
    value. Otherwise each distinct value lands in bin
    ``floor(rows_below * bins / n)``, an equal-frequency rule that never
    splits equal values and depends only on the ordering of the data.
    """
    x = np.asarray(x, dtype=np.float64)
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    if len(uniq) <= disc.bins:
        return inverse.astype(np.int64)
    below = np.concatenate([[0], np.cumsum(counts)[:-1]])
    bin_of_value = (below * disc.bins) // len(x)
    return bin_of_value[inverse].astype(np.int64)


def mutual_information_discrete(a, b) -> float:
    """Mutual information in bits between two discrete vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.shape} vs {b.shape}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float((joint[nz] * np.log2(joint[nz] / (pa @ pb)[nz])).sum())
    return max(mi, 0.0)


def mutual_information(feature, labels, disc: DiscretizationSpec = DiscretizationSpec()) -> float:
    feature = np.asarray(feature)
    labels = np.asarray(labels)
    if feature.shape != labels.shape:
        raise DataError(f"length mismatch: {feature.shape} vs {labels.shape}")
    return mutual_information_discrete(discretize(feature, disc), labels)


def pearson(x, y) -> float:
    """Pearson correlation; 0 when either column is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise DataError("pearson needs at least two values")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def merit(subset_cf, subset_ff_mean: float) -> float:
    """Correlation-based subset merit ``k*r_cf / sqrt(k + k(k-1)*r_ff)``.

    Class-feature correlations enter as absolute values.
    """
    r_cf = np.abs(np.asarray(subset_cf, dtype=np.float64))
    k = len(r_cf)
    if k == 0:
        raise DataError("merit of an empty subset")
    radicand = k + k * (k - 1) * subset_ff_mean
    if radicand <= 0:
        raise DataError(
            f"merit undefined for subset of {k} features with mean "
            f"feature-feature correlation {subset_ff_mean}")
    return float(k * r_cf.mean() / math.sqrt(radicand))


def _finish(method, d, scores, policy, config) -> SelectionResult:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    n_keep = policy.cut([scores[i] for i in order])
    if n_keep == 0:
        raise DataError(f"{method} selection policy {policy} selects no features")
    return SelectionResult(
        method=method,
        selected=tuple(order[:n_keep]),
        scores=tuple(FeatureScore(i, float(s)) for i, s in enumerate(scores)),
        feature_names=d.feature_names,
        config=config,
    )


def select_igbfs(d: Dataset, disc: DiscretizationSpec = DiscretizationSpec(),
                 policy=RelativeThreshold()) -> SelectionResult:
    """Rank features by mutual information with the label."""
    scores = [mutual_information(d.features[:, j], d.labels, disc) for j in range(d.n_features)]
    return _finish(IGBFS, d, scores, policy, {"bins": disc.bins, "policy": repr(policy)})


def _abs_corr_matrix(X: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    norms = np.sqrt((Xc ** 2).sum(axis=0))
    safe = np.where(norms > 0, norms, 1.0)
    C = (Xc.T @ Xc) / np.outer(safe, safe)
    C[norms == 0, :] = 0.0
    C[:, norms == 0] = 0.0
    return np.clip(np.abs(C), 0.0, 1.0)


def greedy_merit_search(r_cf: np.ndarray, r_ff: np.ndarray) -> list[int]:
    """Forward selection on subset merit; stops once merit stops improving."""
    n = len(r_cf)
    chosen: list[int] = []
    best = -math.inf
    remaining = list(range(n))
    while remaining:
        step_best, step_feat = -math.inf, None
        for f in remaining:
            subset = chosen + [f]
            k = len(subset)
            if k > 1:
                block = r_ff[np.ix_(subset, subset)]
                ff_mean = (block.sum() - np.trace(block)) / (k * (k - 1))
            else:
                ff_mean = 0.0
            value = merit(r_cf[subset], ff_mean)
            if value > step_best:
                step_best, step_feat = value, f
        if step_best <= best:
            break
        best = step_best
        chosen.append(step_feat)
        remaining.remove(step_feat)
    return chosen


def select_cbfs(d: Dataset, mode: str = "ranking", policy=RelativeThreshold()) -> SelectionResult:
    """Correlation-based selection.

    ``ranking`` scores each feature by ``|pearson(feature, label)|`` and cuts
    by ``policy``. ``greedy-merit`` runs forward selection on subset merit;
    the policy is then ignored.
    """
    scores = [abs(pearson(d.features[:, j], d.labels)) for j in range(d.n_features)]
    if mode == "ranking":
        return _finish(CBFS, d, scores, policy, {"mode": mode, "policy": repr(policy)})
    if mode != "greedy-merit":
        raise DataError(f"unknown CBFS mode {mode!r}")
    chosen = greedy_merit_search(np.array(scores), _abs_corr_matrix(d.features))
    if not chosen:
        raise DataError("greedy merit search selected no features")
    chosen.sort(key=lambda i: (-scores[i], i))
    return SelectionResult(
        method=CBFS,
        selected=tuple(chosen),
        scores=tuple(FeatureScore(i, float(s)) for i, s in enumerate(scores)),
        feature_names=d.feature_names,
        config={"mode": mode},
    )


def project(d: Dataset, sel: SelectionResult) -> Dataset:
    idx = list(sel.selected)
    if not idx:
        raise DataError("empty feature selection")
    for i in idx:
        if not 0 <= i < d.n_features:
            raise DataError(f"selected feature index {i} out of range for {d.n_features} features")
    return d.with_features(d.features[:, idx], tuple(d.feature_names[i] for i in idx))


def write_scores(sel: SelectionResult, path) -> None:
    """Score report, highest score first: feature_name, score, selected."""
    chosen = set(sel.selected)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_name", "score", "selected"])
        for fs in sel.ranked():
            w.writerow([sel.feature_names[fs.feature_index], repr(fs.score),
                        int(fs.feature_index in chosen)])
