from __future__ import annotations

import json
import math
from pathlib import Path

import pandas as pd
import pytest

from llpbench.orchestrator.aggregator import collect_runs, correlations, results_table, run_documents
from llpbench.orchestrator.plots import write_report_plots


def _run(dataset: str, method: str, fold: int, best: float, auc: float | None = None) -> dict:
    return {
        "dataset_id": dataset,
        "method": method,
        "fold": fold,
        "metric": "accuracy",
        "history": [{"epoch": 0, "train_loss": 0.5, "test_metric": best, "phase": "main"}],
        "best_epoch": 0,
        "best_metric": best,
        "test_auc": auc,
        "seconds": None,
    }


def _write_runs(tmp_path: Path) -> list[Path]:
    paths = []
    for fold, best in enumerate([0.6, 0.8]):
        path = tmp_path / f"fold-{fold}.json"
        path.write_text(json.dumps(_run("C1", "dllp-bce", fold, best, best + 0.1)), encoding="utf-8")
        paths.append(path)
    return paths


def test_collect_runs_success(tmp_path: Path) -> None:
    result = collect_runs(_write_runs(tmp_path))

    assert result["summary"] == {"total": 2, "ok": 2, "failed": 0, "non_json": 0, "invalid_schema": 0}
    assert [doc["fold"] for doc in run_documents(result)] == [0, 1]


def test_collect_runs_handles_broken_files(tmp_path: Path) -> None:
    (tmp_path / "bad.json").write_text("not json", encoding="utf-8")
    (tmp_path / "odd.json").write_text(json.dumps({"foo": 1}), encoding="utf-8")

    result = collect_runs([tmp_path / "bad.json", tmp_path / "odd.json"])

    assert result["summary"]["non_json"] == 1
    assert result["summary"]["invalid_schema"] == 1
    codes = {item["path"]: item["error"]["code"] for item in result["items"]}
    assert codes == {str(tmp_path / "bad.json"): "NON_JSON", str(tmp_path / "odd.json"): "INVALID_SCHEMA"}
    assert run_documents(result) == []


def test_results_table_mean_and_population_std() -> None:
    runs = [_run("C1", "dllp-bce", 0, 0.6, 0.7), _run("C1", "dllp-bce", 1, 0.8, 0.9), _run("C2", "genbags", 0, 0.5)]

    table = results_table(runs)

    first = table.iloc[0]
    assert (first["dataset_id"], first["method"], first["runs"]) == ("C1", "dllp-bce", 2)
    assert first["mean"] == pytest.approx(0.7)
    assert first["std"] == pytest.approx(0.1)
    assert first["auc_mean"] == pytest.approx(0.8)
    assert math.isnan(table.iloc[1]["auc_mean"])


def _metrics() -> pd.DataFrame:
    return pd.DataFrame(
        {
            "dataset_id": ["A", "B", "C"],
            "mean_bag_size": [10.0, 20.0, 30.0],
            "label_prop_stdev": [0.1, 0.2, 0.3],
            "inter_intra_ratio": [1.0, 1.5, math.inf],
            "cramers_v": [0.3, 0.2, 0.1],
        }
    )


def test_correlations() -> None:
    results = results_table(
        [_run("A", "m", 0, 0.9, 0.5), _run("B", "m", 0, 0.5, 0.7), _run("C", "m", 0, 0.1, 0.9)]
    )

    table = correlations(_metrics(), results).set_index("metric")

    assert table.loc["mean_bag_size", "pearson_r"] == pytest.approx(1.0)
    assert table.loc["cramers_v", "pearson_r"] == pytest.approx(-1.0)
    assert table.loc["inter_intra_ratio", "datasets"] == 2


def test_write_report_plots_is_deterministic(tmp_path: Path) -> None:
    clusters = {"A": "low", "B": "high", "C": "high"}

    first = write_report_plots(_metrics(), tmp_path / "one", clusters=clusters)
    second = write_report_plots(_metrics(), tmp_path / "two", clusters=clusters)

    assert [path.name for path in first] == [path.name for path in second]
    assert len(first) == 7
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes().lstrip().startswith(b"<?xml")
