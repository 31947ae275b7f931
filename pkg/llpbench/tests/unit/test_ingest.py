"""Unit tests for raw CSV loading and the two preprocessing regimes."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from llpbench.stages.ingest import (
    ColumnKind,
    ColumnSpec,
    InstanceTable,
    Mode,
    Task,
    Vocabulary,
    ctr_transform,
    load_csv,
    load_table_schema,
    preprocess,
    preprocess_ctr,
    preprocess_sscl,
    read_table,
    read_vocabulary,
    table_fingerprint,
    write_table,
)
from llpbench.utils.errors import (
    ArtifactNotFoundError,
    DataValidationError,
    EmptyDataError,
    ParseError,
    ProvenanceError,
)


def _schema(*kinds: ColumnKind) -> tuple[ColumnSpec, ...]:
    names = {ColumnKind.LABEL: "y", ColumnKind.NUMERICAL: "I", ColumnKind.CATEGORICAL: "C"}
    return tuple(
        ColumnSpec(name=f"{names[kind]}{pos}", kind=kind, position=pos) for pos, kind in enumerate(kinds)
    )


LNC = _schema(ColumnKind.LABEL, ColumnKind.NUMERICAL, ColumnKind.CATEGORICAL)


def _write(tmp_path: Path, text: str, name: str = "raw.csv") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_reads_rows(tmp_path: Path) -> None:
    raw = load_csv(_write(tmp_path, "1,3,a\n0,4,b\n"), LNC)

    assert len(raw.rows) == 2
    assert raw.rows[0] == ("1", "3", "a")


def test_load_csv_records_missing_cells(tmp_path: Path) -> None:
    raw = load_csv(_write(tmp_path, "1,,a\n"), LNC)

    assert raw.rows[0][1] is None


def test_load_csv_arity_error_names_row(tmp_path: Path) -> None:
    with pytest.raises(ParseError) as excinfo:
        load_csv(_write(tmp_path, "1,3,a\n0,4\n"), LNC)

    assert excinfo.value.row == 1
    assert "row 1" in str(excinfo.value)


def test_load_csv_skips_header_and_reads_tabs(tmp_path: Path) -> None:
    raw = load_csv(_write(tmp_path, "y\tI\tC\n1\t2\tx\n"), LNC, header=True, delimiter="tab")

    assert raw.rows == (("1", "2", "x"),)


def test_load_csv_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ArtifactNotFoundError):
        load_csv(tmp_path / "absent.csv", LNC)


def test_schema_requires_exactly_one_label(tmp_path: Path) -> None:
    with pytest.raises(DataValidationError):
        load_csv(_write(tmp_path, "1,2\n"), _schema(ColumnKind.NUMERICAL, ColumnKind.CATEGORICAL))


@pytest.mark.parametrize(
    ("value", "expected"),
    [(2.0, 2.0), (10.0, 5.0), (1.5, 1.0), (-1.0, -1.0), (3.0, 1.0)],
)
def test_ctr_transform_threshold(value: float, expected: float) -> None:
    assert ctr_transform(value) == expected


def test_ctr_transform_other_bases() -> None:
    assert ctr_transform(10.0, log_base="2") == 11.0
    assert ctr_transform(200.0, log_base="10") == 5.0


def test_preprocess_ctr_transforms_then_shifts(tmp_path: Path) -> None:
    raw = load_csv(_write(tmp_path, "0,-1,a\n1,3,b\n"), LNC)

    table, _ = preprocess_ctr(raw)

    assert table.num[:, 0].tolist() == [0.0, 2.0]
    assert table.mode is Mode.CTR
    assert table.task is Task.BINARY


def test_preprocess_ctr_numerical_post_state(tmp_path: Path) -> None:
    rows = "\n".join(f"{i % 2},{value},k{i % 3}" for i, value in enumerate([5, 17, 300, 0, 2, 41]))
    table, _ = preprocess_ctr(load_csv(_write(tmp_path, rows + "\n"), LNC))

    column = table.num[:, 0]
    assert column.min() == 0.0
    assert np.all(column == np.floor(column))


def test_preprocess_ctr_missing_values(tmp_path: Path) -> None:
    raw = load_csv(_write(tmp_path, "1,,\n0,10,a\n1,3,\n"), LNC)

    table, vocab = preprocess_ctr(raw)

    # Missing numericals become 0 before the shift; 10 -> 5 and 3 -> 1.
    assert table.num[:, 0].tolist() == [0.0, 5.0, 1.0]
    assert table.cat[0, 0] == table.cat[2, 0]
    assert vocab.encode(0, None) == table.cat[0, 0]


def test_preprocess_ctr_rejects_non_binary_label(tmp_path: Path) -> None:
    raw = load_csv(_write(tmp_path, "2,1,a\n"), LNC)

    with pytest.raises(DataValidationError):
        preprocess_ctr(raw)


def test_preprocess_sscl_drops_unlabeled_rows(tmp_path: Path) -> None:
    lines = [f"{'' if i < 3 else i},{i},v{i % 2}" for i in range(10)]
    table, _ = preprocess_sscl(load_csv(_write(tmp_path, "\n".join(lines) + "\n"), LNC))

    assert table.m == 7
    assert table.task is Task.REGRESSION


def test_preprocess_sscl_merges_rare_values(tmp_path: Path) -> None:
    lines = ["1,1,z"] * 5 + ["2,1,w"] * 6 + ["3,1,"]
    table, vocab = preprocess_sscl(load_csv(_write(tmp_path, "\n".join(lines) + "\n"), LNC))

    assert vocab.encode(0, "z") == 0
    assert vocab.encode(0, None) == 0
    assert vocab.encode(0, "w") == 1
    assert table.cat[:, 0].tolist() == [0] * 5 + [1] * 6 + [0]
    assert table.vocab_sizes == (2,)


def test_preprocess_sscl_mean_imputes(tmp_path: Path) -> None:
    table, _ = preprocess_sscl(load_csv(_write(tmp_path, "1,1,a\n2,,a\n3,3,a\n"), LNC))

    assert table.num[:, 0].tolist() == [1.0, 2.0, 3.0]


def test_preprocess_sscl_all_labels_missing(tmp_path: Path) -> None:
    with pytest.raises(EmptyDataError):
        preprocess_sscl(load_csv(_write(tmp_path, ",1,a\n,2,b\n"), LNC))


def test_vocabulary_round_trip(tmp_path: Path) -> None:
    lines = [f"{i % 2},{i},{'abc'[i % 3] if i % 4 else ''}" for i in range(12)]
    table, vocab = preprocess_ctr(load_csv(_write(tmp_path, "\n".join(lines) + "\n"), LNC))

    for code in table.cat[:, 0]:
        assert vocab.encode(0, vocab.decode(0, int(code))) == code
    restored = Vocabulary.from_dict(json.loads(json.dumps(vocab.to_dict())))
    assert restored.sizes == vocab.sizes


def test_load_table_schema_and_dispatch(tmp_path: Path) -> None:
    sidecar = tmp_path / "raw.schema.json"
    sidecar.write_text(
        json.dumps(
            {
                "columns": [
                    {"name": "label", "kind": "label"},
                    {"name": "I1", "kind": "numerical"},
                    {"name": "C1", "kind": "categorical"},
                ],
                "mode": "sscl",
                "min_count": 0,
            }
        ),
        encoding="utf-8",
    )
    schema = load_table_schema(sidecar)
    raw = load_csv(_write(tmp_path, "1.5,2,a\n0.5,4,b\n"), schema.columns)

    table, _ = preprocess(raw, schema)

    assert schema.mode is Mode.SSCL
    assert table.labels.tolist() == [1.5, 0.5]
    assert table.vocab_sizes == (3,)


def test_load_table_schema_rejects_unknown_kind(tmp_path: Path) -> None:
    sidecar = tmp_path / "bad.schema.json"
    sidecar.write_text(json.dumps({"columns": [{"name": "a", "kind": "text"}], "mode": "ctr"}), encoding="utf-8")

    with pytest.raises(DataValidationError):
        load_table_schema(sidecar)


def test_write_and_read_table(tmp_path: Path) -> None:
    raw = load_csv(_write(tmp_path, "0,10,a\n1,3,b\n1,,a\n"), LNC)
    table, vocab = preprocess_ctr(raw)

    digest = write_table(tmp_path / "out" / "table.csv", table, vocab=vocab, config_hash="abc")
    loaded, loaded_digest = read_table(tmp_path / "out" / "table.csv")

    assert digest == loaded_digest == table_fingerprint(table)
    assert np.array_equal(loaded.cat, table.cat)
    assert np.array_equal(loaded.num, table.num)
    assert np.array_equal(loaded.labels, table.labels)
    assert (tmp_path / "out" / "vocab.json").is_file()
    meta = json.loads((tmp_path / "out" / "table.meta.json").read_text(encoding="utf-8"))
    assert meta["config_hash"] == "abc"
    assert meta["task"] == "binary"


def test_write_table_is_byte_stable(tmp_path: Path) -> None:
    table, _ = preprocess_ctr(load_csv(_write(tmp_path, "0,10,a\n1,3,b\n"), LNC))

    write_table(tmp_path / "a.csv", table)
    write_table(tmp_path / "b.csv", table)

    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_read_table_detects_tampering(tmp_path: Path) -> None:
    table, _ = preprocess_ctr(load_csv(_write(tmp_path, "0,10,a\n1,3,b\n"), LNC))
    target = tmp_path / "table.csv"
    write_table(target, table)
    target.write_bytes(target.read_bytes().replace(b"\n1", b"\n0", 1))

    with pytest.raises(ProvenanceError):
        read_table(target)


def test_feature_named_label_keeps_its_codes(tmp_path: Path) -> None:
    schema = (
        ColumnSpec(name="label", kind=ColumnKind.CATEGORICAL, position=0),
        ColumnSpec(name="y", kind=ColumnKind.LABEL, position=1),
    )
    table, vocab = preprocess_ctr(load_csv(_write(tmp_path, "a,0\nb,1\na,1\nc,0\n"), schema))

    write_table(tmp_path / "out" / "table.csv", table, vocab=vocab)
    loaded, _ = read_table(tmp_path / "out" / "table.csv")

    assert loaded.label_name == "y"
    assert loaded.cat.tolist() == [[0], [1], [0], [2]]
    assert loaded.labels.tolist() == [0.0, 1.0, 1.0, 0.0]


def test_table_rejects_clashing_column_names() -> None:
    with pytest.raises(DataValidationError, match="unique"):
        InstanceTable(
            cat=np.zeros((2, 1), dtype=np.int64),
            num=np.zeros((2, 0)),
            labels=np.zeros(2),
            vocab_sizes=(1,),
            cat_names=("label",),
        )


def test_read_table_loads_and_checks_vocabulary(tmp_path: Path) -> None:
    table, vocab = preprocess_ctr(load_csv(_write(tmp_path, "0,10,a\n1,3,b\n1,,c\n"), LNC))
    target = tmp_path / "out" / "table.csv"
    write_table(target, table, vocab=vocab)

    loaded = read_vocabulary(target)
    assert loaded is not None
    assert loaded.sizes == table.vocab_sizes
    assert loaded.encode(0, "b") == vocab.encode(0, "b")
    assert read_vocabulary(tmp_path / "elsewhere" / "table.csv") is None

    vocab_file = target.with_name("vocab.json")
    payload = json.loads(vocab_file.read_text(encoding="utf-8"))
    payload["columns"][0]["values"] = payload["columns"][0]["values"][:-1]
    vocab_file.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(DataValidationError, match="vocab.json"):
        read_table(target)
