"""Collect train-run documents and join them with hardness metrics."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, MutableMapping, Sequence

import numpy as np
import pandas as pd

from ..formats.validators import validate_payload

logger = logging.getLogger(__name__)

CORRELATED_METRICS = ("mean_bag_size", "label_prop_stdev", "inter_intra_ratio", "cramers_v")
RESULT_COLUMNS = ("dataset_id", "method", "metric", "runs", "mean", "std", "auc_mean", "auc_std")


def collect_runs(
    paths: Iterable[Path],
    *,
    schema: str = "train_run.v1.json",
) -> Dict[str, object]:
    """Parse run files into validated documents with summary counts."""

    items: List[MutableMapping[str, object]] = []
    summary: Dict[str, int] = {"total": 0, "ok": 0, "failed": 0, "non_json": 0, "invalid_schema": 0}
    for path in sorted(paths):
        summary["total"] += 1
        item: MutableMapping[str, object] = {"path": str(path)}
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            item["ok"] = False
            item["error"] = {"code": "NON_JSON", "message": str(exc)}
            summary["failed"] += 1
            summary["non_json"] += 1
            items.append(item)
            continue
        valid, errors = validate_payload(schema, payload)
        if not valid:
            item["ok"] = False
            item["error"] = {"code": "INVALID_SCHEMA", "message": "; ".join(errors)}
            summary["failed"] += 1
            summary["invalid_schema"] += 1
            items.append(item)
            continue
        item["ok"] = True
        item["data"] = payload
        summary["ok"] += 1
        items.append(item)
    if summary["failed"]:
        logger.warning("aggregator.skipped_runs", extra=dict(summary))
    return {"items": items, "summary": summary, "schema": schema}


def run_documents(collected: Mapping[str, object]) -> List[Mapping[str, object]]:
    return [item["data"] for item in collected["items"] if item.get("ok")]  # type: ignore[index,union-attr]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std())


def results_table(runs: Sequence[Mapping[str, object]]) -> pd.DataFrame:
    """One row per ``(dataset_id, method)`` with mean and population std over folds."""

    grouped: Dict[tuple[str, str], List[Mapping[str, object]]] = {}
    for run in runs:
        key = (str(run.get("dataset_id", "")), str(run["method"]))
        grouped.setdefault(key, []).append(run)
    rows = []
    for (dataset, method), members in sorted(grouped.items()):
        best = [float(run["best_metric"]) for run in members if run.get("best_metric") is not None]
        aucs = [float(run["test_auc"]) for run in members if run.get("test_auc") is not None]
        mean, std = _mean_std(best)
        auc_mean, auc_std = _mean_std(aucs)
        rows.append(
            {
                "dataset_id": dataset,
                "method": method,
                "metric": str(members[0]["metric"]),
                "runs": len(members),
                "mean": mean,
                "std": std,
                "auc_mean": auc_mean,
                "auc_std": auc_std,
            }
        )
    return pd.DataFrame(rows, columns=list(RESULT_COLUMNS))


def _score_column(results: pd.DataFrame) -> pd.Series:
    """Reported score per row: test AUC where available, else the monitored metric."""

    return results["auc_mean"].where(results["auc_mean"].notna(), results["mean"])


def correlations(metrics: pd.DataFrame, results: pd.DataFrame) -> pd.DataFrame:
    """Pearson correlation of each hardness metric with each method's mean score across datasets."""

    scored = results.assign(score=_score_column(results))
    rows = []
    for method in sorted(scored["method"].unique()):
        joined = metrics.merge(
            scored.loc[scored["method"] == method, ["dataset_id", "score"]], on="dataset_id"
        )
        for metric in CORRELATED_METRICS:
            if metric not in joined.columns:
                continue
            pair = joined[[metric, "score"]].replace([np.inf, -np.inf], np.nan).dropna()
            enough = len(pair) >= 2 and pair[metric].nunique() > 1 and pair["score"].nunique() > 1
            rows.append(
                {
                    "method": method,
                    "metric": metric,
                    "datasets": len(pair),
                    "pearson_r": float(pair[metric].corr(pair["score"])) if enough else float("nan"),
                }
            )
    return pd.DataFrame(rows, columns=["method", "metric", "datasets", "pearson_r"])


__all__ = ["CORRELATED_METRICS", "collect_runs", "correlations", "results_table", "run_documents"]
