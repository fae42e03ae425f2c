"""Confusion-matrix metrics, k-fold cross-validation, learning curves and
2-component PCA."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import HyperParams, fit_model
from .data import DataError, Dataset, stratified_sample


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(predicted, truth) -> ConfusionMatrix:
    """Counts with attack (1) as the positive class."""
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise DataError(f"length mismatch: {p.shape} vs {t.shape}")
    for v in (p, t):
        if np.any((v != 0) & (v != 1)):
            raise DataError("labels must be binary")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy, precision, recall (TPR) and false alarm rate (FPR).

    A metric whose denominator is zero is reported as 0 and named in
    ``undefined``.
    """

    accuracy: float
    precision: float
    recall: float
    far: float
    undefined: tuple[str, ...] = ()
    confusion: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["undefined"] = list(self.undefined)
        return d

    @classmethod
    def from_dict(cls, d) -> "MetricsReport":
        return cls(d["accuracy"], d["precision"], d["recall"], d["far"],
                   tuple(d.get("undefined", ())), dict(d.get("confusion", {})))


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total <= 0:
        raise DataError("metrics of an empty confusion matrix")
    undefined = []

    def ratio(name, num, den):
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=ratio("precision", cm.tp, cm.tp + cm.fp),
        recall=ratio("recall", cm.tp, cm.tp + cm.fn),
        far=ratio("far", cm.fp, cm.tn + cm.fp),
        undefined=tuple(undefined),
        confusion=asdict(cm),
    )


def accuracy(predicted, truth) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(truth)))


def kfold_indices(m: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle cut into ``folds`` contiguous, nearly equal parts."""
    if folds < 2:
        raise DataError(f"need at least 2 folds, got {folds}")
    if folds > m:
        raise DataError(f"{folds} folds requested for {m} rows")
    perm = np.random.default_rng(seed).permutation(m)
    return np.array_split(perm, folds)


def kfold_cv(d: Dataset, hp: HyperParams, folds: int = 3, seed: int = 0) -> float:
    """Mean held-out accuracy over ``folds`` folds."""
    parts = kfold_indices(d.n_rows, folds, seed)
    scores = []
    for i, test_idx in enumerate(parts):
        train_idx = np.concatenate([p for j, p in enumerate(parts) if j != i])
        train = d.take(train_idx)
        if hp.variant == "knn" and hp.knn_k > train.n_rows:
            raise DataError(f"knn_k={hp.knn_k} exceeds fold training size {train.n_rows}")
        model = fit_model(train, hp, seed=seed + i)
        scores.append(accuracy(model.predict(d.features[test_idx]), d.labels[test_idx]))
    return float(np.mean(scores))


@dataclass(frozen=True)
class CurvePoint:
    train_size: int
    train_acc: float
    cv_acc: float


@dataclass(frozen=True)
class LearningCurve:
    points: tuple[CurvePoint, ...]
    folds: int
    seed: int

    def __post_init__(self):
        sizes = [p.train_size for p in self.points]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise DataError("learning-curve sizes must be strictly increasing")

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["train_size", "train_acc", "cv_acc", "gap"])
            for p in self.points:
                w.writerow([p.train_size, repr(p.train_acc), repr(p.cv_acc),
                            repr(p.train_acc - p.cv_acc)])


def learning_curve(d: Dataset, hp: HyperParams, fractions, folds: int = 5,
                   seed: int = 0) -> LearningCurve:
    """Training and cross-validation accuracy over growing stratified subsamples."""
    fractions = list(fractions)
    if not fractions or any(not 0 < f <= 1 for f in fractions):
        raise DataError("fractions must lie in (0, 1]")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise DataError("fractions must be strictly ascending")
    points = []
    for i, frac in enumerate(fractions):
        sub = d if frac == 1.0 else stratified_sample(d, int(math.floor(frac * d.n_rows + 0.5)),
                                                      seed=seed + 7919 * (i + 1))
        if sub.n_rows < folds:
            raise DataError(f"fraction {frac} yields {sub.n_rows} rows, fewer than {folds} folds")
        model = fit_model(sub, hp, seed=seed)
        train_acc = accuracy(model.predict(sub.features), sub.labels)
        cv_acc = kfold_cv(sub, hp, folds, seed)
        points.append(CurvePoint(sub.n_rows, train_acc, cv_acc))
    return LearningCurve(tuple(points), folds, seed)


def fractions_for_sizes(sizes, n_rows: int) -> list[float]:
    """Fractions of ``n_rows`` that reproduce absolute subsample sizes."""
    return [min(1.0, s / n_rows) for s in sizes]


def minimum_training_size(curve: LearningCurve, epsilon: float = 0.002) -> tuple[int, bool]:
    """Smallest size at which the curve has settled; returns ``(size, converged)``.

    A point qualifies when its cv accuracy is within ``epsilon`` of the final
    point's and its train/cv gap is at most ``5 * epsilon``. The final point
    trivially matches itself, so only earlier points count as convergence;
    if none qualifies the last size is returned with ``converged=False``.
    """
    pts = curve.points
    if len(pts) < 2:
        raise DataError("need at least two learning-curve points")
    final = pts[-1].cv_acc
    for p in pts[:-1]:
        if abs(p.cv_acc - final) <= epsilon and p.train_acc - p.cv_acc <= 5 * epsilon:
            return p.train_size, True
    return pts[-1].train_size, False


def overfit_gap(curve: LearningCurve) -> list[float]:
    if not curve.points:
        raise DataError("empty learning curve")
    return [p.train_acc - p.cv_acc for p in curve.points]


@dataclass(frozen=True)
class PcaResult:
    projection: np.ndarray
    components: np.ndarray  # (2, N), rows unit-norm
    explained_variance: tuple[float, float]
    explained_variance_ratio: tuple[float, float] = (0.0, 0.0)

    def write_csv(self, path, labels=None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pc1", "pc2", "label"])
            for i, (a, b) in enumerate(self.projection.tolist()):
                w.writerow([repr(a), repr(b), "" if labels is None else int(labels[i])])


def _power_iteration(C: np.ndarray, start: np.ndarray, against: np.ndarray | None,
                     tol: float, max_iter: int, floor: float = 1e-300) -> tuple[np.ndarray, float]:
    """Dominant eigenvector of ``C`` orthogonal to ``against``. An image
    norm at or below ``floor`` means no variance is left: ``v`` is returned
    with eigenvalue 0."""
    v = start
    if against is not None:
        v = v - (v @ against) * against
    v = v / np.linalg.norm(v)
    for _ in range(max_iter):
        w = C @ v
        if against is not None:
            w = w - (w @ against) * against
        norm = np.linalg.norm(w)
        if norm <= floor:
            return v, 0.0
        w = w / norm
        if np.linalg.norm(w - v) < tol or np.linalg.norm(w + v) < tol:
            return w, float(w @ C @ w)
        v = w
    raise DataError(f"power iteration did not converge in {max_iter} iterations")


def pca2(d: Dataset, tol: float = 1e-9, max_iter: int = 10_000) -> PcaResult:
    """Top two principal components by power iteration with deflation.

    Each component is unit-norm with its largest-magnitude entry positive.
    """
    X = d.features
    m, n = X.shape
    if n < 2 or m < 2:
        raise DataError("pca2 needs at least two rows and two features")
    Xc = X - X.mean(axis=0)
    C = (Xc.T @ Xc) / m
    start = np.random.default_rng(0).standard_normal(n)
    # deflation leaves rounding residue of order eps * |C|
    floor = max(1e-12 * float(np.abs(C).max()), 1e-300)
    comps, values = [], []
    deflated = C.copy()
    for c in range(2):
        v, lam = _power_iteration(deflated, start, comps[0] if c else None, tol, max_iter, floor)
        if c:
            v = v - (v @ comps[0]) * comps[0]
            v /= np.linalg.norm(v)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        lam = max(float(v @ C @ v), 0.0)
        comps.append(v)
        values.append(lam)
        deflated = deflated - lam * np.outer(v, v)
    W = np.vstack(comps)
    total = float(np.trace(C))
    ratio = (values[0] / total, values[1] / total) if total > 0 else (0.0, 0.0)
    return PcaResult(Xc @ W.T, W, (values[0], values[1]), ratio)
