"""Command-line entry point.

Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
errors (the message names the failing stage).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .classifiers import fit_model, load_model
from .data import DataError, apply_zscore, fit_zscore, write_csv
from .evaluation import (confusion, fractions_for_sizes, learning_curve, metrics,
                         minimum_training_size, pca2)
from .features import write_scores
from .pipeline import (ConfigError, PipelineConfig, StageClock, StageError, load_dataset, optimize,
                       prepare, run_pipeline, stage_seed, staged_output)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; this reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive")
    return sizes


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_preprocess(cfg, args, out: Path) -> str:
    d = load_dataset(cfg)
    if args.normalize:
        d = apply_zscore(d, fit_zscore(d))
    write_csv(d, out / "cleaned.csv")
    n0, n1 = d.class_counts()
    return f"{d.n_rows} rows ({n0} normal, {n1} attack), {d.n_features} features"


def cmd_learning_curve(cfg, args, out: Path) -> str:
    clock = StageClock()
    p = prepare(cfg, load_dataset(cfg, clock), clock)
    if args.sizes:
        fractions = fractions_for_sizes(args.sizes, p.train.n_rows)
    else:
        fractions = cfg.curve_fractions
    with clock.stage("learning_curve"):
        curve = learning_curve(p.train, cfg.pinned_params(), fractions, cfg.curve_folds,
                               stage_seed(cfg.seed, "learning_curve"))
        size, converged = minimum_training_size(curve, args.epsilon)
    curve.write_csv(out / "learning_curve.csv")
    _write_json(out / "learning_curve.json", {"minimum_training_size": size, "converged": converged,
                                              "epsilon": args.epsilon})
    return f"minimum training size {size} ({'converged' if converged else 'not converged'})"


def cmd_select_features(cfg, args, out: Path) -> str:
    if cfg.method == "none":
        raise ConfigError("select-features needs [features] method = igbfs or cbfs")
    p = prepare(cfg, load_dataset(cfg))
    write_scores(p.selection, out / "feature_scores.csv")
    return f"selected {len(p.selection.selected)}: {', '.join(p.selection.selected_names)}"


def cmd_optimize(cfg, args, out: Path) -> str:
    if cfg.optimizer == "none":
        raise ConfigError("optimize needs [model] optimizer set to a search method")
    clock = StageClock()
    p = prepare(cfg, load_dataset(cfg, clock), clock)
    with clock.stage("optimize"):
        trace = optimize(cfg, p.train)
    trace.write_jsonl(out / "trace.jsonl")
    trace.write_csv(out / "trace.csv")
    _write_json(out / "best.json", trace.summary())
    return f"best {trace.best.candidate} cv accuracy {trace.best.score:.6f}"


def cmd_evaluate(cfg, args, out: Path) -> str:
    clock = StageClock()
    p = prepare(cfg, load_dataset(cfg, clock), clock)
    with clock.stage("fit"):
        if args.model:
            model = load_model(args.model)
        else:
            model = fit_model(p.train, cfg.pinned_params(), seed=stage_seed(cfg.seed, "fit"))
    with clock.stage("evaluate"):
        report = metrics(confusion(model.predict(p.test.features), p.test.labels))
    _write_json(out / "metrics.json", report.as_dict())
    return f"accuracy {report.accuracy:.6f} far {report.far:.6f}"


def cmd_run(cfg, args, out: Path) -> str:
    r = run_pipeline(cfg)
    return (f"accuracy {r.test_metrics.accuracy:.6f} far {r.test_metrics.far:.6f}; "
            f"report in {Path(cfg.out_dir) / 'report.json'}")


def cmd_pca(cfg, args, out: Path) -> str:
    clock = StageClock()
    d = load_dataset(cfg, clock)
    with clock.stage("pca"):
        res = pca2(apply_zscore(d, fit_zscore(d)))
    res.write_csv(out / "pca.csv", d.labels)
    a, b = res.explained_variance_ratio
    return f"explained variance ratio {a:.4f}, {b:.4f}"


COMMANDS = {
    "preprocess": (cmd_preprocess, "ingest and clean a dataset, write cleaned.csv"),
    "learning-curve": (cmd_learning_curve, "learning curve and minimum training size"),
    "select-features": (cmd_select_features, "score and select features"),
    "optimize": (cmd_optimize, "hyper-parameter search on the training split"),
    "evaluate": (cmd_evaluate, "fit pinned parameters (or load a model) and score the test split"),
    "run": (cmd_run, "full pipeline with report"),
    "pca": (cmd_pca, "2-D PCA projection of the normalized dataset"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nidsopt", description="Multi-stage optimized intrusion-detection pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, help="pipeline config file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out-dir", help="override the output directory")
        if name == "preprocess":
            p.add_argument("--normalize", action="store_true", help="z-score the cleaned features")
        elif name == "learning-curve":
            p.add_argument("--sizes", type=_sizes, help="comma-separated absolute training sizes")
            p.add_argument("--epsilon", type=float, default=0.002, help="convergence tolerance")
        elif name == "evaluate":
            p.add_argument("--model", help="saved model.json to score instead of fitting")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("nidsopt: error: a command is required")
        if args.seed is not None and args.seed < 0:
            raise UsageError("nidsopt: error: --seed must be non-negative")
        cfg = PipelineConfig.from_ini(args.config).with_overrides(args.seed, args.out_dir)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"nidsopt: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    handler = COMMANDS[args.command][0]
    try:
        if args.command == "run":
            message = handler(cfg, args, Path(cfg.out_dir))
        else:
            with staged_output(cfg.out_dir) as scratch:
                message = handler(cfg, args, scratch)
    except ConfigError as exc:
        print(f"nidsopt: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"nidsopt: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"nidsopt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(message)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
