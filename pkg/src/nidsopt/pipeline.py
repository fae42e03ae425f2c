"""Configuration-driven three-stage pipeline and its JSON run report.

Stage order: ingest, preprocess, normalize, split, smote, select, optimize,
fit, evaluate, then the optional learning-curve and pca side products.
Every stage is seeded from the master seed and timed with a monotonic
clock.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import platform
import shutil
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .classifiers import KNN, RF, HyperParams, fit_model, save_model
from .data import (DataError, Dataset, SchemaAdapter, SplitSpec, apply_zscore, fit_zscore,
                   load_csv, preprocess, split_train_test, stratified_sample)
from .evaluation import (LearningCurve, MetricsReport, PcaResult, confusion, learning_curve,
                         metrics, minimum_training_size, pca2)
from .features import (CBFS, IGBFS, DiscretizationSpec, SelectionResult, parse_policy, project,
                       select_cbfs, select_igbfs, write_scores)
from .hyperopt import OPTIMIZERS, CVObjective, OptimizationTrace, run_optimizer
from .hyperopt.space import Categorical, IntRange, SearchSpace, parse_range
from .smote import SmoteConfig, oversample

STAGES = ("ingest", "preprocess", "normalize", "split", "smote", "select", "optimize", "fit",
          "evaluate", "learning_curve", "pca")
METHODS = (IGBFS, CBFS, "none")
NORMALIZE_MODES = ("full", "train", "none")
SMOTE_PLACEMENTS = ("post-split", "pre-split")
SELECT_PLACEMENTS = ("post-smote", "pre-smote")

REPORT_FILE = "report.json"
REPORT_FORMAT = "nidsopt-report"
REPORT_VERSION = 1
# report keys that hold wall-clock measurements
TIMING_FIELDS = ("timings",)


class ConfigError(Exception):
    """Invalid or unreadable pipeline configuration."""


class StageError(DataError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def stage_seed(master: int, stage: str) -> int:
    """Independent per-stage seed derived from the master seed."""
    return int(np.random.SeedSequence([master, STAGES.index(stage)]).generate_state(1)[0])


def reference_path(name: str) -> Path:
    """Path of a file shipped in the package's ``reference`` directory."""
    return Path(str(resources.files("nidsopt") / "reference" / name))


def _bool(text, key: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _int(text, key: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _float(text, key: str) -> float:
    try:
        return float(str(text).strip())
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


# section -> keys accepted in that section
_ADAPTER_KEYS = ("label_column", "benign", "attack", "drop", "delimiter", "encoding",
                 "drop_nonfinite", "rename_duplicates")
_SECTIONS = {
    "data": ("path", "adapter", "sample_rows", "normalize") + _ADAPTER_KEYS,
    "split": ("train_fraction", "stratify"),
    "smote": ("enabled", "k", "target", "placement"),
    "features": ("method", "policy", "bins", "cbfs_mode", "placement"),
    "model": ("variant", "optimizer", "budget", "cv_folds", "rf_trees", "rf_criterion", "knn_k",
              "rf_trees_range", "knn_k_range"),
    "run": ("seed", "out_dir", "learning_curve", "curve_fractions", "curve_folds", "pca"),
}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one pipeline run depends on.

    Read from an INI-style file (``key = value`` lines under ``[data]``,
    ``[split]``, ``[smote]``, ``[features]``, ``[model]`` and ``[run]``).
    ``optimizer = none`` fits the pinned ``rf_*`` / ``knn_k`` values.
    """

    data_path: str = ""
    adapter: SchemaAdapter = SchemaAdapter()
    sample_rows: int | None = None
    normalize: str = "full"
    train_fraction: float = 0.7
    stratify: bool = False
    smote: bool = True
    smote_k: int = 5
    smote_target: int | None = None
    smote_placement: str = "post-split"
    method: str = IGBFS
    policy: str = "threshold:0.01"
    bins: int = 10
    cbfs_mode: str = "ranking"
    select_placement: str = "post-smote"
    variant: str = RF
    optimizer: str = "bo-tpe"
    budget: int = 30
    cv_folds: int = 3
    rf_trees: int = 100
    rf_criterion: str = "gini"
    knn_k: int = 5
    rf_trees_range: str = "10:250"
    knn_k_range: str = "1:29:2"
    seed: int = 0
    out_dir: str = "out"
    learning_curve: bool = False
    curve_fractions: tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 1.0)
    curve_folds: int = 5
    pca: bool = False

    def __post_init__(self):
        checks = [
            (self.optimizer in OPTIMIZERS + ("none",),
             f"optimizer must be one of {', '.join(OPTIMIZERS)}, none"),
            (self.method in METHODS, f"method must be one of {', '.join(METHODS)}"),
            (self.variant in (KNN, RF), "variant must be knn or rf"),
            (self.normalize in NORMALIZE_MODES, f"normalize must be one of {', '.join(NORMALIZE_MODES)}"),
            (self.smote_placement in SMOTE_PLACEMENTS, "smote placement must be post-split or pre-split"),
            (self.select_placement in SELECT_PLACEMENTS, "features placement must be post-smote or pre-smote"),
            (0.0 < self.train_fraction < 1.0, "train_fraction must lie in (0, 1)"),
            (self.budget >= 1, "budget must be positive"),
            (self.cv_folds >= 2, "cv_folds must be at least 2"),
            (self.curve_folds >= 2, "curve_folds must be at least 2"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.sample_rows is None or self.sample_rows >= 2, "sample_rows must be at least 2"),
            (len(self.curve_fractions) > 0, "curve_fractions must not be empty"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            parse_policy(self.policy)
            self.search_space()
            self.pinned_params()
            DiscretizationSpec(self.bins)
            SmoteConfig(self.smote_k, self.smote_target)
        except DataError as exc:
            raise ConfigError(str(exc)) from None

    # construction -----------------------------------------------------

    @classmethod
    def from_ini(cls, path) -> "PipelineConfig":
        """Parse a config file; relative paths resolve against its directory."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
        return cls.from_sections(sections, base_dir=path.parent)

    @classmethod
    def from_sections(cls, sections: dict, base_dir=None) -> "PipelineConfig":
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        for name, values in sections.items():
            if name not in _SECTIONS:
                raise ConfigError(f"unknown config section [{name}]")
            for key in values:
                if key not in _SECTIONS[name]:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
        get = lambda s, k: sections.get(s, {}).get(k)  # noqa: E731
        kw: dict = {}

        data = sections.get("data", {})
        if get("data", "path"):
            kw["data_path"] = str(_resolve(get("data", "path"), base))
        adapter_values: dict = {}
        if get("data", "adapter"):
            adapter_values.update(_read_adapter(get("data", "adapter"), base))
        adapter_values.update({k: v for k, v in data.items() if k in _ADAPTER_KEYS})
        if adapter_values:
            kw["adapter"] = SchemaAdapter.from_mapping(adapter_values)
        if get("data", "sample_rows"):
            kw["sample_rows"] = _int(get("data", "sample_rows"), "sample_rows")
        if get("data", "normalize"):
            kw["normalize"] = get("data", "normalize").strip()

        if get("split", "train_fraction"):
            kw["train_fraction"] = _float(get("split", "train_fraction"), "train_fraction")
        if get("split", "stratify"):
            kw["stratify"] = _bool(get("split", "stratify"), "stratify")

        if get("smote", "enabled"):
            kw["smote"] = _bool(get("smote", "enabled"), "smote.enabled")
        if get("smote", "k"):
            kw["smote_k"] = _int(get("smote", "k"), "smote.k")
        if get("smote", "target"):
            kw["smote_target"] = _int(get("smote", "target"), "smote.target")
        if get("smote", "placement"):
            kw["smote_placement"] = get("smote", "placement").strip()

        if get("features", "method"):
            kw["method"] = get("features", "method").strip().lower()
        if get("features", "policy"):
            kw["policy"] = get("features", "policy").strip()
        if get("features", "bins"):
            kw["bins"] = _int(get("features", "bins"), "bins")
        if get("features", "cbfs_mode"):
            kw["cbfs_mode"] = get("features", "cbfs_mode").strip()
        if get("features", "placement"):
            kw["select_placement"] = get("features", "placement").strip()

        for key in ("variant", "optimizer", "rf_criterion", "rf_trees_range", "knn_k_range"):
            if get("model", key):
                kw[key] = get("model", key).strip().lower()
        for key in ("budget", "cv_folds", "rf_trees", "knn_k"):
            if get("model", key):
                kw[key] = _int(get("model", key), key)

        if get("run", "seed"):
            kw["seed"] = _int(get("run", "seed"), "seed")
        if get("run", "out_dir"):
            kw["out_dir"] = str(_resolve(get("run", "out_dir"), base))
        if get("run", "learning_curve"):
            kw["learning_curve"] = _bool(get("run", "learning_curve"), "learning_curve")
        if get("run", "curve_fractions"):
            kw["curve_fractions"] = tuple(_float(v, "curve_fractions")
                                          for v in get("run", "curve_fractions").split(",") if v.strip())
        if get("run", "curve_folds"):
            kw["curve_folds"] = _int(get("run", "curve_folds"), "curve_folds")
        if get("run", "pca"):
            kw["pca"] = _bool(get("run", "pca"), "pca")
        return cls(**kw)

    def with_overrides(self, seed: int | None = None, out_dir=None) -> "PipelineConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if out_dir is not None:
            changes["out_dir"] = str(out_dir)
        return replace(self, **changes)

    # derived settings -------------------------------------------------

    def search_space(self) -> SearchSpace:
        if self.variant == KNN:
            lo, hi, step = parse_range(self.knn_k_range)
            return SearchSpace([IntRange("knn_k", lo, hi, step)])
        lo, hi, step = parse_range(self.rf_trees_range)
        return SearchSpace([IntRange("rf_trees", lo, hi, step),
                            Categorical("rf_criterion", ("gini", "entropy"))])

    def pinned_params(self) -> HyperParams:
        return HyperParams(self.variant, knn_k=self.knn_k, rf_trees=self.rf_trees,
                           rf_criterion=self.rf_criterion)

    # serialization ----------------------------------------------------

    def to_sections(self) -> dict:
        """Section/key/value strings; ``from_sections`` inverts this."""
        data = {"path": self.data_path, "normalize": self.normalize, **self.adapter.as_dict()}
        if self.sample_rows is not None:
            data["sample_rows"] = str(self.sample_rows)
        smote = {"enabled": _fmt(self.smote), "k": str(self.smote_k),
                 "placement": self.smote_placement}
        if self.smote_target is not None:
            smote["target"] = str(self.smote_target)
        return {
            "data": data,
            "split": {"train_fraction": repr(self.train_fraction), "stratify": _fmt(self.stratify)},
            "smote": smote,
            "features": {"method": self.method, "policy": self.policy, "bins": str(self.bins),
                         "cbfs_mode": self.cbfs_mode, "placement": self.select_placement},
            "model": {"variant": self.variant, "optimizer": self.optimizer,
                      "budget": str(self.budget), "cv_folds": str(self.cv_folds),
                      "rf_trees": str(self.rf_trees), "rf_criterion": self.rf_criterion,
                      "knn_k": str(self.knn_k), "rf_trees_range": self.rf_trees_range,
                      "knn_k_range": self.knn_k_range},
            "run": {"seed": str(self.seed), "out_dir": self.out_dir,
                    "learning_curve": _fmt(self.learning_curve),
                    "curve_fractions": ", ".join(repr(f) for f in self.curve_fractions),
                    "curve_folds": str(self.curve_folds), "pca": _fmt(self.pca)},
        }

    def write_ini(self, path) -> None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_dict(self.to_sections())
        with Path(path).open("w", encoding="utf-8") as fh:
            parser.write(fh)

    def as_dict(self) -> dict:
        """Report view: the sections minus the output directory."""
        sections = self.to_sections()
        del sections["run"]["out_dir"]
        return sections

    def config_hash(self) -> str:
        """SHA-256 over everything that affects results except the seed."""
        sections = self.as_dict()
        del sections["run"]["seed"]
        blob = json.dumps(sections, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _fmt(flag: bool) -> str:
    return "true" if flag else "false"


def _resolve(text: str, base: Path) -> Path:
    p = Path(text.strip()).expanduser()
    return p if p.is_absolute() else (base / p)


def _read_adapter(text: str, base: Path) -> dict:
    """Adapter values from a file path or the name of a shipped adapter."""
    path = _resolve(text, base)
    if not path.is_file():
        shipped = reference_path(f"{text.strip()}.adapter")
        if not shipped.is_file():
            raise ConfigError(f"schema adapter not found: {text.strip()}")
        path = shipped
    try:
        return SchemaAdapter.from_file(path).as_dict()
    except DataError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class RunReport:
    """Structured outcome of one pipeline run.

    ``stages`` maps every stage to ``"ok"`` or ``"disabled"``; ``timings``
    holds seconds (millisecond resolution) for each stage that ran. Side
    products that do not belong in the report (trace, selection, model...)
    travel in ``artifacts`` and are written by :func:`emit_report`.
    """

    config: dict
    config_hash: str
    seed: int
    versions: dict
    stages: dict
    timings: dict
    sizes: dict
    features: dict | None
    optimization: dict | None
    hyperparameters: dict
    test_metrics: MetricsReport
    learning_curve: dict | None = None
    pca: dict | None = None
    artifacts: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        d = {"format": REPORT_FORMAT, "version": REPORT_VERSION}
        for f in fields(self):
            if f.name == "artifacts":
                continue
            value = getattr(self, f.name)
            d[f.name] = value.as_dict() if isinstance(value, MetricsReport) else value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("format") != REPORT_FORMAT:
            raise DataError("not a run report")
        if d.get("version") != REPORT_VERSION:
            raise DataError(f"unsupported report version {d.get('version')}")
        kw = {f.name: d.get(f.name) for f in fields(cls) if f.name != "artifacts"}
        kw["test_metrics"] = MetricsReport.from_dict(kw["test_metrics"])
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def without_timings(self) -> dict:
        """Report contents with wall-clock fields removed."""
        d = self.to_dict()
        for key in TIMING_FIELDS:
            d.pop(key, None)
        return d


def read_report(path) -> RunReport:
    return RunReport.from_json(Path(path).read_text(encoding="utf-8"))


def emit_report(r: RunReport, out_dir) -> list[Path]:
    """Write ``report.json`` and the side files for whatever artifacts the
    run produced. Returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from None
    written = []

    def put(name, writer):
        path = out / name
        try:
            writer(path)
        except OSError as exc:
            raise DataError(f"cannot write {path}: {exc}") from None
        written.append(path)

    put(REPORT_FILE, lambda p: p.write_text(r.to_json(), encoding="utf-8"))
    a = r.artifacts
    if a.get("config") is not None:
        put("config.ini", a["config"].write_ini)
    if a.get("selection") is not None:
        put("feature_scores.csv", lambda p: write_scores(a["selection"], p))
    if a.get("trace") is not None:
        put("trace.jsonl", a["trace"].write_jsonl)
        put("trace.csv", a["trace"].write_csv)
    if a.get("curve") is not None:
        put("learning_curve.csv", a["curve"].write_csv)
    if a.get("pca") is not None:
        projection, labels = a["pca"]
        put("pca.csv", lambda p: projection.write_csv(p, labels))
    if a.get("model") is not None:
        put("model.json", lambda p: save_model(a["model"], p))
    return written


class StageClock:
    """Runs stages, records status and timing, and names the failing stage."""

    def __init__(self):
        self.status = {s: "disabled" for s in STAGES}
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (DataError, ConfigError, OSError, ValueError, np.linalg.LinAlgError) as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = round(time.perf_counter() - t0, 3)
        self.status[name] = "ok"


Observer = Callable[[str, dict], None]


def _notify(observer: Observer | None, stage: str, **data):
    if observer is not None:
        observer(stage, data)


def load_dataset(cfg: PipelineConfig, clock: StageClock | None = None) -> Dataset:
    """Ingest and preprocess, then draw the optional stratified sample."""
    clock = clock or StageClock()
    with clock.stage("ingest"):
        if not cfg.data_path:
            raise DataError("no dataset path configured")
        a = cfg.adapter
        raw = load_csv(cfg.data_path, a.label_column, a.delimiter, a.encoding, a.rename_duplicates)
    with clock.stage("preprocess"):
        d = preprocess(raw, a.policy, a.drop, a.drop_nonfinite)
        if cfg.sample_rows is not None:
            d = stratified_sample(d, cfg.sample_rows, stage_seed(cfg.seed, "preprocess"))
    return d


@dataclass
class Prepared:
    """Normalized data split into train/test, with SMOTE and selection applied."""

    full: Dataset
    train_raw: Dataset
    train: Dataset
    test: Dataset
    selection: SelectionResult | None


def prepare(cfg: PipelineConfig, d: Dataset, clock: StageClock | None = None,
            observer: Observer | None = None, select: bool = True) -> Prepared:
    """Normalize, split, oversample and select features.

    ``train_raw`` is the training split before SMOTE; ``train`` and ``test``
    are the final (oversampled, projected) partitions.
    """
    clock = clock or StageClock()
    if cfg.normalize == "full":
        with clock.stage("normalize"):
            d = apply_zscore(d, fit_zscore(d))
    smote_cfg = SmoteConfig(cfg.smote_k, cfg.smote_target, stage_seed(cfg.seed, "smote"))
    if cfg.smote and cfg.smote_placement == "pre-split":
        with clock.stage("smote"):
            _notify(observer, "smote", input=d)
            d = oversample(d, smote_cfg)
    with clock.stage("split"):
        train, test = split_train_test(d, SplitSpec(cfg.train_fraction, stage_seed(cfg.seed, "split"),
                                                    cfg.stratify))
        _notify(observer, "split", train=train, test=test)
    if cfg.normalize == "train":
        with clock.stage("normalize"):
            params = fit_zscore(train)
            train, test = apply_zscore(train, params), apply_zscore(test, params)
    train_raw = train
    if cfg.smote and cfg.smote_placement == "post-split":
        with clock.stage("smote"):
            _notify(observer, "smote", input=train)
            train = oversample(train, smote_cfg)

    selection = None
    if select and cfg.method != "none":
        with clock.stage("select"):
            source = train_raw if cfg.select_placement == "pre-smote" else train
            _notify(observer, "select", input=source)
            selection = select_features(cfg, source)
            train, test = project(train, selection), project(test, selection)
    return Prepared(d, train_raw, train, test, selection)


def select_features(cfg: PipelineConfig, d: Dataset) -> SelectionResult:
    policy = parse_policy(cfg.policy)
    if cfg.method == IGBFS:
        return select_igbfs(d, DiscretizationSpec(cfg.bins), policy)
    return select_cbfs(d, cfg.cbfs_mode, policy)


def optimize(cfg: PipelineConfig, train: Dataset) -> OptimizationTrace:
    seed = stage_seed(cfg.seed, "optimize")
    objective = CVObjective(train, cfg.variant, cfg.cv_folds, seed)
    return run_optimizer(cfg.optimizer, cfg.search_space(), objective, cfg.budget, seed)


def versions() -> dict:
    import numba

    return {"nidsopt": __version__, "numpy": np.__version__, "numba": numba.__version__,
            "python": platform.python_version()}


def _counts(d: Dataset) -> dict:
    n0, n1 = d.class_counts()
    return {"rows": d.n_rows, "normal": n0, "attack": n1}


def execute(cfg: PipelineConfig, observer: Observer | None = None) -> RunReport:
    """Run every stage in memory and build the report; nothing is written."""
    clock = StageClock()
    d = load_dataset(cfg, clock)
    p = prepare(cfg, d, clock, observer)

    trace = None
    hp = cfg.pinned_params()
    if cfg.optimizer != "none":
        with clock.stage("optimize"):
            _notify(observer, "optimize", input=p.train)
            trace = optimize(cfg, p.train)
            hp = HyperParams.from_candidate(cfg.variant, trace.best.candidate)
    with clock.stage("fit"):
        _notify(observer, "fit", input=p.train)
        model = fit_model(p.train, hp, seed=stage_seed(cfg.seed, "fit"))
    with clock.stage("evaluate"):
        _notify(observer, "evaluate", input=p.test)
        test_metrics = metrics(confusion(model.predict(p.test.features), p.test.labels))

    curve = curve_info = None
    if cfg.learning_curve:
        with clock.stage("learning_curve"):
            curve = learning_curve(p.train, hp, cfg.curve_fractions, cfg.curve_folds,
                                   stage_seed(cfg.seed, "learning_curve"))
            size, converged = minimum_training_size(curve)
            curve_info = {"points": [[q.train_size, q.train_acc, q.cv_acc] for q in curve.points],
                          "minimum_training_size": size, "converged": converged}
    pca_result = pca_info = None
    if cfg.pca:
        with clock.stage("pca"):
            pca_result = pca2(p.full)
            pca_info = {"explained_variance": list(pca_result.explained_variance),
                        "explained_variance_ratio": list(pca_result.explained_variance_ratio)}

    features = None
    if p.selection is not None:
        sel = p.selection
        features = {"method": sel.method, "config": dict(sel.config),
                    "selected": sel.selected_names,
                    "scores": {sel.feature_names[s.feature_index]: s.score for s in sel.scores}}
    sizes = {"input": _counts(d), "train": _counts(p.train_raw), "train_after_smote": _counts(p.train),
             "test": _counts(p.test), "features_in": d.n_features,
             "features_used": p.train.n_features}
    return RunReport(
        config=cfg.as_dict(),
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
        versions=versions(),
        stages=dict(clock.status),
        timings=dict(clock.timings),
        sizes=sizes,
        features=features,
        optimization=trace.summary() if trace is not None else None,
        hyperparameters=hp.as_dict(),
        test_metrics=test_metrics,
        learning_curve=curve_info,
        pca=pca_info,
        artifacts={"config": cfg, "selection": p.selection, "trace": trace, "curve": curve,
                   "pca": (pca_result, p.full.labels) if pca_result is not None else None,
                   "model": model},
    )


@contextmanager
def staged_output(out_dir):
    """Yield a scratch directory inside ``out_dir``; its files move into
    ``out_dir`` on success and are deleted on failure."""
    out = Path(out_dir)
    created = not out.exists()
    try:
        out.mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    except OSError as exc:
        raise StageError("emit", exc) from exc
    try:
        yield scratch
        for f in sorted(scratch.iterdir()):
            os.replace(f, out / f.name)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        if created and out.is_dir() and not any(out.iterdir()):
            out.rmdir()
        raise
    shutil.rmtree(scratch, ignore_errors=True)


def run_pipeline(cfg: PipelineConfig, observer: Observer | None = None) -> RunReport:
    """Run the full pipeline and write the report and side files to
    ``cfg.out_dir``. On any stage error nothing is left behind."""
    with staged_output(cfg.out_dir) as scratch:
        report = execute(cfg, observer)
        try:
            emit_report(report, scratch)
        except DataError as exc:
            raise StageError("emit", exc) from exc
    return report
