from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np
import pandas as pd
import pytest

from llpbench.stages.characterize import (
    Axis,
    classify_all,
    classify_bag_separation,
    classify_label_variation,
    classify_tail_size,
    cluster_names,
    default_names,
    kmeans,
    reports_from_frame,
)
from llpbench.stages.hardness import REPORT_COLUMNS, HardnessReport, SepStats
from llpbench.utils.errors import DataValidationError


def _report(
    dataset_id: str,
    *,
    stdev: float = 0.1,
    pct: Sequence[int] = (2, 3, 4, 5),
    ratio: float = 1.0,
) -> HardnessReport:
    return HardnessReport(
        dataset_id=dataset_id,
        num_bags=10,
        num_instances=100,
        mean_bag_size=10.0,
        bag_size_stdev=1.0,
        label_prop_stdev=stdev,
        percentile_sizes=dict(zip((50, 70, 85, 95), pct)),
        sep=SepStats.build(ratio, 1.0),
        label_bias=0.3,
        avg_label_prop=0.3,
    )


def test_kmeans_separates_obvious_groups() -> None:
    points = [[0.0], [0.1], [0.2], [10.0], [10.1], [10.2]]

    result = kmeans(points, 2, seed=0)

    assert result.converged
    assert len(set(result.labels[:3].tolist())) == 1
    assert len(set(result.labels[3:].tolist())) == 1
    assert result.labels[0] != result.labels[3]
    assert result.inertia == pytest.approx(4 * 0.01)


@pytest.mark.parametrize("seed", range(5))
def test_kmeans_inertia_never_increases(seed: int) -> None:
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(60, 3))

    result = kmeans(points, 4, seed=seed)

    assert all(later <= earlier + 1e-12 for earlier, later in zip(result.history, result.history[1:]))
    assert len(set(result.labels.tolist())) <= 4


def test_kmeans_is_deterministic_per_seed() -> None:
    points = np.random.default_rng(3).normal(size=(40, 2))

    first = kmeans(points, 3, seed=7)
    second = kmeans(points, 3, seed=7)

    assert np.array_equal(first.labels, second.labels)
    assert np.array_equal(first.centers, second.centers)


def test_kmeans_k_equal_to_distinct_points_has_zero_inertia() -> None:
    result = kmeans([[1.0], [2.0], [3.0]], 3, seed=0)

    assert result.inertia == 0.0


def test_kmeans_rejects_bad_k() -> None:
    with pytest.raises(DataValidationError):
        kmeans([[1.0], [1.0], [2.0]], 3, seed=0)
    with pytest.raises(DataValidationError):
        kmeans([[1.0]], 0, seed=0)


def test_label_variation_names_follow_mean_stdev() -> None:
    values = [0.400, 0.010, 0.201, 0.011, 0.401, 0.200]
    reports = [_report(f"d{i}", stdev=value) for i, value in enumerate(values)]

    assignment = classify_label_variation(reports, 3, seed=1)

    assert assignment.names == ("low", "medium", "high")
    assert assignment.name_of("d1") == "low"
    assert assignment.name_of("d4") == "high"
    assert assignment.name_of("d2") == "medium"
    assert list(assignment.ordering) == sorted(assignment.ordering)


def test_tail_size_orders_by_seventieth_percentile() -> None:
    reports = [
        _report("short-a", pct=(1, 2, 2, 3)),
        _report("short-b", pct=(1, 2, 3, 3)),
        _report("long-a", pct=(50, 200, 900, 2400)),
        _report("long-b", pct=(60, 210, 950, 2500)),
        _report("mid-a", pct=(10, 40, 90, 200)),
        _report("mid-b", pct=(12, 45, 95, 210)),
    ]

    assignment = classify_tail_size(reports, 3, seed=0)

    assert assignment.names == ("short-tailed", "medium-tailed", "long-tailed")
    assert assignment.name_of("short-a") == assignment.name_of("short-b") == "short-tailed"
    assert assignment.name_of("mid-a") == "medium-tailed"
    assert assignment.name_of("long-b") == "long-tailed"


def test_bag_separation_clusters_ratios() -> None:
    reports = [_report(f"r{ratio}", ratio=ratio) for ratio in (1.0, 1.001, 2.0, 2.001, 4.0, 4.001, 8.0, 8.001)]

    assignment = classify_bag_separation(reports, 4, seed=2)

    assert assignment.name_of("r1.0") == "less-separated"
    assert assignment.name_of("r2.0") == "medium-separated"
    assert assignment.name_of("r4.0") == "well-separated"
    assert assignment.name_of("r8.001") == "far-separated"


def test_bag_separation_rejects_infinite_ratio() -> None:
    reports = [_report("a"), _report("b", ratio=2.0)]
    reports.append(replace(reports[0], dataset_id="c", sep=SepStats.build(1.0, 0.0)))

    with pytest.raises(DataValidationError):
        classify_bag_separation(reports, 2)


def test_custom_and_fallback_names() -> None:
    reports = [_report(f"d{i}", stdev=0.1 * i) for i in range(6)]

    custom = classify_label_variation(reports, 2, names=["calm", "wild"])

    assert set(custom.names) == {"calm", "wild"}
    assert default_names(Axis.LABEL_VARIATION, 5) == tuple(f"cluster-{i}" for i in range(5))
    assert default_names(Axis.TAIL_SIZE, 4)[0] == "very short-tailed"
    assert cluster_names(["a", "b"], 1) == ("a",)


def test_classify_all_skips_small_axes() -> None:
    reports = [_report(f"d{i}", stdev=0.05 * i, ratio=1.0 + i) for i in range(3)]

    results = classify_all(reports, {Axis.LABEL_VARIATION: 2, Axis.BAG_SEPARATION: 4}, seed=0)

    assert [result.axis for result in results] == [Axis.LABEL_VARIATION]
    rows = results[0].rows()
    assert {row["dataset_id"] for row in rows} == {"d0", "d1", "d2"}
    assert all(row["axis"] == "label_variation" for row in rows)


def test_reports_from_frame_round_trip() -> None:
    originals = [_report("a", stdev=0.2, ratio=2.0), _report("b", stdev=0.3)]
    frame = pd.DataFrame([report.csv_row() for report in originals], columns=list(REPORT_COLUMNS))

    rebuilt = reports_from_frame(frame)

    assert [report.dataset_id for report in rebuilt] == ["a", "b"]
    assert rebuilt[0].label_prop_stdev == pytest.approx(0.2)
    assert rebuilt[0].sep is not None and rebuilt[0].sep.ratio == pytest.approx(2.0)
    assert rebuilt[1].percentile_sizes == {50: 2, 70: 3, 85: 4, 95: 5}
    assert rebuilt[1].cramers_v is None


def test_reports_from_frame_without_separation() -> None:
    row = _report("a").csv_row()
    row.update(mean_inter=math.nan, mean_intra=math.nan, inter_intra_ratio=math.nan)

    rebuilt = reports_from_frame(pd.DataFrame([row]))

    assert rebuilt[0].sep is None


def test_reports_from_frame_requires_percentiles() -> None:
    with pytest.raises(DataValidationError):
        reports_from_frame(pd.DataFrame([{"dataset_id": "a"}]))


def _spread_reports(count: int, seed: int) -> list[HardnessReport]:
    rng = np.random.default_rng(seed)
    return [
        _report(
            f"ds{idx:02d}",
            stdev=float(rng.uniform(0.0, 0.5)),
            pct=tuple(int(v) for v in np.sort(rng.integers(1, 400, size=4))),
            ratio=float(rng.uniform(0.5, 3.0)),
        )
        for idx in range(count)
    ]


@pytest.mark.parametrize(
    "classify", [classify_label_variation, classify_tail_size, classify_bag_separation]
)
def test_named_partition_ignores_report_order(classify) -> None:
    reports = _spread_reports(30, seed=11)
    expected = classify(reports, 4, seed=3).as_mapping()
    rng = np.random.default_rng(5)

    for _ in range(20):
        shuffled = [reports[idx] for idx in rng.permutation(len(reports))]
        assert classify(shuffled, 4, seed=3).as_mapping() == expected


def test_kmeans_labels_follow_input_order() -> None:
    rng = np.random.default_rng(2)
    points = rng.normal(size=(25, 2))
    base = kmeans(points, 3, seed=0)
    perm = rng.permutation(25)

    moved = kmeans(points[perm], 3, seed=0)

    assert moved.inertia == pytest.approx(base.inertia)
    assert np.array_equal(moved.labels, base.labels[perm])
