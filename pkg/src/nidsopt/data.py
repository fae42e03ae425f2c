"""Dataset representation, CSV ingestion, label binarization, Z-score
normalization and train/test splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


NUMERIC = "numeric"
CATEGORICAL = "categorical"


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class RawTable:
    """Parsed CSV contents before any cleaning.

    ``rows`` hold the raw cell strings; ``kinds`` maps every column name to
    ``"numeric"`` or ``"categorical"``.
    """

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    label_column: str
    kinds: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise DataError("duplicate column names")
        if self.label_column not in self.columns:
            raise DataError(f"label column {self.label_column!r} not in header")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DataError(f"row {i} has {len(row)} cells, expected {width}")
        if not self.kinds:
            object.__setattr__(self, "kinds", infer_kinds(self.columns, self.rows))

    def __len__(self):
        return len(self.rows)


def infer_kinds(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> dict[str, str]:
    """A column is numeric when every non-empty cell parses as a number."""
    kinds = {}
    for j, name in enumerate(columns):
        numeric = True
        for row in rows:
            cell = row[j].strip()
            if cell and not _is_number(cell):
                numeric = False
                break
        kinds[name] = NUMERIC if numeric else CATEGORICAL
    return kinds


def _dedupe_names(names):
    """Suffix repeated names ``.1``, ``.2``, ... in order of appearance."""
    seen: dict[str, int] = {}
    out = []
    for name in names:
        n = seen.get(name, 0)
        seen[name] = n + 1
        out.append(name if n == 0 else f"{name}.{n}")
    return out


def load_csv(path, label_column: str, delimiter: str = ",", encoding: str = "utf-8",
             rename_duplicates: bool = False) -> RawTable:
    """Read a headed CSV file into a :class:`RawTable`.

    Header names are stripped of surrounding whitespace (CICIDS-2017 exports
    carry a leading space on most names). Blank lines are skipped. Repeated
    header names are an error unless ``rename_duplicates`` is set.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding=encoding) as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: missing header row") from None
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: cannot decode as {encoding}: {exc}") from None
        columns = [name.strip() for name in header]
        if rename_duplicates:
            columns = _dedupe_names(columns)
        columns = tuple(columns)
        if len(set(columns)) != len(columns):
            raise DataError(f"{path}: duplicate column names in header")
        if label_column not in columns:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        width = len(columns)
        rows = []
        try:
            for i, row in enumerate(reader):
                if not row:
                    continue
                if len(row) != width:
                    raise DataError(f"{path}: row {i} has {len(row)} cells, expected {width}")
                rows.append(tuple(row))
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: cannot decode as {encoding}: {exc}") from None
    return RawTable(columns, tuple(rows), label_column)


@dataclass(frozen=True)
class LabelPolicy:
    """Maps raw label spellings onto the binary target.

    ``benign`` spellings map to 0. When ``attack`` is None every other
    non-empty label maps to 1; otherwise only the listed spellings do and
    anything else is an error.
    """

    benign: frozenset[str]
    attack: frozenset[str] | None = None

    def encode(self, label: str) -> int:
        if label in self.benign:
            return 0
        if self.attack is None or label in self.attack:
            return 1
        raise DataError(f"label {label!r} not covered by the attack policy")


DEFAULT_POLICY = LabelPolicy(frozenset({"BENIGN", "Benign", "benign", "normal", "Normal", "0"}))
BINARY_POLICY = LabelPolicy(frozenset({"0"}), frozenset({"1"}))


@dataclass(frozen=True)
class SchemaAdapter:
    """Dataset-specific ingestion settings read from a ``key = value`` file.

    Recognised keys: ``label_column``, ``benign`` and ``attack`` (comma
    separated spellings; ``attack = *`` means "anything else"), ``drop``
    (comma separated columns), ``delimiter``, ``encoding``,
    ``drop_nonfinite`` and ``rename_duplicates``.
    """

    label_column: str = "label"
    policy: LabelPolicy = DEFAULT_POLICY
    drop: tuple[str, ...] = ()
    delimiter: str = ","
    drop_nonfinite: bool = False
    encoding: str = "utf-8"
    rename_duplicates: bool = False

    def load(self, path) -> "Dataset":
        """Read and clean ``path`` with these settings."""
        raw = load_csv(path, self.label_column, self.delimiter, self.encoding,
                       self.rename_duplicates)
        return preprocess(raw, self.policy, self.drop, self.drop_nonfinite)

    def as_dict(self) -> dict:
        return {
            "label_column": self.label_column,
            "benign": ",".join(sorted(self.policy.benign)),
            "attack": "*" if self.policy.attack is None else ",".join(sorted(self.policy.attack)),
            "drop": ",".join(self.drop),
            "delimiter": "tab" if self.delimiter == "\t" else self.delimiter,
            "encoding": self.encoding,
            "drop_nonfinite": str(self.drop_nonfinite).lower(),
            "rename_duplicates": str(self.rename_duplicates).lower(),
        }

    @classmethod
    def from_file(cls, path) -> "SchemaAdapter":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"schema adapter not found: {path}")
        values = {}
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip().lower()] = value.strip()
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values) -> "SchemaAdapter":
        def _list(text):
            return tuple(v.strip() for v in text.split(",") if v.strip())

        benign = frozenset(_list(values["benign"])) if "benign" in values else DEFAULT_POLICY.benign
        attack_text = values.get("attack", "*").strip()
        attack = None if attack_text == "*" else frozenset(_list(attack_text))

        def _flag(key):
            return values.get(key, "false").strip().lower() in ("1", "true", "yes", "on")

        delimiter = values.get("delimiter", ",")
        if delimiter in ("\\t", "tab"):
            delimiter = "\t"
        return cls(
            label_column=values.get("label_column", "label"),
            policy=LabelPolicy(benign, attack),
            drop=_list(values.get("drop", "")),
            delimiter=delimiter,
            drop_nonfinite=_flag("drop_nonfinite"),
            encoding=values.get("encoding", "utf-8").strip() or "utf-8",
            rename_duplicates=_flag("rename_duplicates"),
        )


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix with binary labels (0 = normal, 1 = attack).

    Arrays are stored read-only; derive new datasets instead of mutating.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        m, n = X.shape
        if m < 1 or n < 1:
            raise DataError(f"dataset must have at least one row and one feature, got {m}x{n}")
        if y.shape != (m,):
            raise DataError(f"label vector length {y.shape} does not match {m} rows")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or infinite values")
        if np.any((y != 0) & (y != 1)):
            raise DataError("labels must be binary")
        names = tuple(self.feature_names)
        if len(names) != n:
            raise DataError(f"{len(names)} feature names for {n} columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n_rows

    def class_counts(self) -> tuple[int, int]:
        ones = int(self.labels.sum())
        return self.n_rows - ones, ones

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names)

    def with_features(self, features, names=None) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names if names is None else names)


def preprocess(raw: RawTable, attack_policy: LabelPolicy = DEFAULT_POLICY,
               drop: Sequence[str] = (), drop_nonfinite: bool = False) -> Dataset:
    """Turn a :class:`RawTable` into a binary-labelled numeric :class:`Dataset`.

    Rows with an empty label are discarded. Categorical feature columns are
    label-encoded by lexicographic order of their distinct values. Missing
    or non-finite numeric cells are an error unless ``drop_nonfinite`` is
    set, in which case those rows are discarded.
    """
    if len(raw) == 0:
        raise DataError("table has no rows")
    label_idx = raw.columns.index(raw.label_column)
    for name in drop:
        if name not in raw.columns:
            raise DataError(f"cannot drop unknown column {name!r}")
    feature_cols = [j for j, name in enumerate(raw.columns)
                    if j != label_idx and name not in drop]
    if not feature_cols:
        raise DataError("no feature columns")

    rows = [row for row in raw.rows if row[label_idx].strip()]
    if not rows:
        raise DataError("no labelled rows remain after discarding unlabelled ones")
    labels = np.array([attack_policy.encode(row[label_idx].strip()) for row in rows], dtype=np.int64)

    m = len(rows)
    X = np.empty((m, len(feature_cols)), dtype=np.float64)
    for out_j, j in enumerate(feature_cols):
        name = raw.columns[j]
        cells = [row[j].strip() for row in rows]
        if raw.kinds[name] == CATEGORICAL:
            codes = {v: i for i, v in enumerate(sorted(set(cells)))}
            X[:, out_j] = [codes[c] for c in cells]
        else:
            for i, c in enumerate(cells):
                if not c:
                    raise DataError(f"missing numeric value in column {name!r}, row {i}")
                X[i, out_j] = float(c)

    finite = np.isfinite(X).all(axis=1)
    if not finite.all():
        if not drop_nonfinite:
            bad = int(np.flatnonzero(~finite)[0])
            raise DataError(f"non-finite numeric value in row {bad}")
        X, labels = X[finite], labels[finite]
        if len(labels) == 0:
            raise DataError("no rows remain after discarding non-finite values")
    names = tuple(raw.columns[j] for j in feature_cols)
    return Dataset(X, labels, names)


def write_csv(d: Dataset, path, label_column: str = "label") -> None:
    """Write a dataset as CSV with a trailing 0/1 label column.

    Floats are written with ``repr`` so reading the file back is exact.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*d.feature_names, label_column])
        for row, lab in zip(d.features.tolist(), d.labels.tolist()):
            w.writerow([repr(v) for v in row] + [lab])


@dataclass(frozen=True)
class NormalizationParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if np.shape(self.mu) != np.shape(self.sigma):
            raise DataError("mu and sigma lengths differ")


def fit_zscore(d: Dataset) -> NormalizationParams:
    """Per-feature population mean and standard deviation (``ddof=0``)."""
    return NormalizationParams(d.features.mean(axis=0), d.features.std(axis=0))


def apply_zscore(d: Dataset, p: NormalizationParams) -> Dataset:
    """Map every cell to ``(x - mu) / sigma``; zero-sigma features become 0."""
    if len(p.mu) != d.n_features:
        raise DataError(f"normalization fitted on {len(p.mu)} features, dataset has {d.n_features}")
    sigma = np.asarray(p.sigma, dtype=np.float64)
    safe = np.where(sigma > 0, sigma, 1.0)
    Z = (d.features - p.mu) / safe
    Z[:, sigma == 0] = 0.0
    return d.with_features(Z)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratify: bool = False

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise DataError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(labels: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    m = len(labels)
    rng = np.random.default_rng(spec.seed)
    if spec.stratify:
        train = []
        for cls in (0, 1):
            idx = np.flatnonzero(labels == cls)
            idx = idx[rng.permutation(len(idx))]
            train.append(idx[:_round_half_up(spec.train_fraction * len(idx))])
        train_idx = np.sort(np.concatenate(train))
        mask = np.ones(m, dtype=bool)
        mask[train_idx] = False
        test_idx = np.flatnonzero(mask)
    else:
        perm = rng.permutation(m)
        n_train = _round_half_up(spec.train_fraction * m)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise DataError(
            f"train_fraction {spec.train_fraction} on {m} rows yields "
            f"{len(train_idx)} train / {len(test_idx)} test rows")
    return train_idx, test_idx


def split_train_test(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded random partition into train and test sets.

    ``round(train_fraction * M)`` rows go to train. The split is uniform
    (non-stratified) unless ``spec.stratify`` is set.
    """
    if d.n_rows < 2:
        raise DataError("need at least two rows to split")
    train_idx, test_idx = split_indices(d.labels, spec)
    return d.take(train_idx), d.take(test_idx)


def stratified_sample(d: Dataset, n_rows: int, seed: int) -> Dataset:
    """Seeded class-proportional subsample of ``n_rows`` rows, original order kept."""
    if n_rows >= d.n_rows:
        return d
    rng = np.random.default_rng(seed)
    counts = d.class_counts()
    keep = []
    for cls in (0, 1):
        idx = np.flatnonzero(d.labels == cls)
        share = _round_half_up(n_rows * counts[cls] / d.n_rows)
        if counts[cls] and share == 0:
            share = 1
        keep.append(rng.choice(idx, size=min(share, len(idx)), replace=False))
    return d.take(np.sort(np.concatenate(keep)))
