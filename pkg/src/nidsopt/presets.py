"""Shipped reference settings: dataset adapters and pinned optima."""

from __future__ import annotations

import csv
from dataclasses import replace

from .classifiers import KNN, HyperParams
from .data import DataError, SchemaAdapter
from .pipeline import PipelineConfig, reference_path

DATASETS = ("cicids2017", "unsw_nb15")
# reported selected-feature counts per dataset and method
FEATURE_COUNTS = {
    ("cicids2017", "igbfs"): 31,
    ("unsw_nb15", "igbfs"): 19,
    ("cicids2017", "cbfs"): 41,
    ("unsw_nb15", "cbfs"): 32,
}


def adapter(dataset: str) -> SchemaAdapter:
    if dataset not in DATASETS:
        raise DataError(f"no shipped adapter for {dataset!r}")
    return SchemaAdapter.from_file(reference_path(f"{dataset}.adapter"))


def pinned_table() -> list[dict]:
    with reference_path("pinned.csv").open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def pinned_params(dataset: str, method: str, optimizer: str, variant: str) -> HyperParams:
    """Reported optimum for one dataset / selection method / optimizer / classifier."""
    for row in pinned_table():
        if (row["dataset"], row["method"], row["optimizer"], row["variant"]) == (
                dataset, method, optimizer, variant):
            if variant == KNN:
                return HyperParams(KNN, knn_k=int(row["knn_k"]))
            return HyperParams(variant, rf_trees=int(row["rf_trees"]),
                               rf_criterion=row["rf_criterion"])
    raise DataError(f"no pinned optimum for {dataset}/{method}/{optimizer}/{variant}")


def reference_config(dataset: str, method: str, optimizer: str, variant: str,
                     data_path: str, **overrides) -> PipelineConfig:
    """Config that fits the pinned optimum directly (no search), keeping the
    reported number of top-ranked features."""
    hp = pinned_params(dataset, method, optimizer, variant)
    policy = f"top:{FEATURE_COUNTS[(dataset, method)]}"
    cfg = PipelineConfig(data_path=str(data_path), adapter=adapter(dataset), method=method,
                         policy=policy, variant=variant, optimizer="none", knn_k=hp.knn_k,
                         rf_trees=hp.rf_trees, rf_criterion=hp.rf_criterion)
    return replace(cfg, **overrides)
