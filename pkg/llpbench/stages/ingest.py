"""Raw CSV loading and the CTR / SSCL preprocessing regimes."""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..formats.validators import require_valid
from ..utils.errors import (
    ArtifactNotFoundError,
    DataValidationError,
    EmptyDataError,
    ParseError,
    ProvenanceError,
)
from ..utils.hex import fingerprint
from ..utils.io import atomic_write_bytes, frame_csv_bytes, meta_path, read_json, require_file, write_json
from ..utils.logging import increment_counter

logger = logging.getLogger(__name__)

Cell = Optional[str]

_LOG_BASES: Mapping[str, float] = {"e": math.e, "2": 2.0, "10": 10.0}
_CTR_THRESHOLD = 2.0


class ColumnKind(str, Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"
    LABEL = "label"


class Mode(str, Enum):
    CTR = "ctr"
    SSCL = "sscl"


class Task(str, Enum):
    BINARY = "binary"
    REGRESSION = "regression"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: ColumnKind
    position: int


@dataclass(frozen=True)
class TableSchema:
    """Column roles plus the parsing options of the sidecar document."""

    columns: Tuple[ColumnSpec, ...]
    mode: Mode
    header: bool = False
    delimiter: str = "comma"
    log_base: str = "e"
    min_count: int = 5

    def __post_init__(self) -> None:
        validate_columns(self.columns)

    @property
    def label(self) -> ColumnSpec:
        return next(col for col in self.columns if col.kind is ColumnKind.LABEL)

    def of_kind(self, kind: ColumnKind) -> List[ColumnSpec]:
        return [col for col in self.columns if col.kind is kind]


def validate_columns(columns: Sequence[ColumnSpec]) -> None:
    labels = [col for col in columns if col.kind is ColumnKind.LABEL]
    if len(labels) != 1:
        raise DataValidationError(
            f"schema must declare exactly one label column, found {len(labels)}"
        )
    positions = [col.position for col in columns]
    if len(set(positions)) != len(positions) or any(pos < 0 for pos in positions):
        raise DataValidationError("column positions must be unique and non-negative")
    names = [col.name for col in columns]
    if len(set(names)) != len(names):
        raise DataValidationError("column names must be unique")


@dataclass(frozen=True)
class RawTable:
    schema: Tuple[ColumnSpec, ...]
    rows: Tuple[Tuple[Cell, ...], ...]

    def column(self, spec: ColumnSpec) -> List[Cell]:
        return [row[spec.position] for row in self.rows]


@dataclass
class Vocabulary:
    """Per categorical column mapping raw string (``None`` = missing) to code."""

    columns: List[str]
    codes: List[Dict[Cell, int]]
    reserved: List[Optional[int]] = field(default_factory=list)

    def size(self, column: int) -> int:
        extra = 1 if self.reserved and self.reserved[column] is not None else 0
        return len(self.codes[column]) + extra

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(self.size(idx) for idx in range(len(self.columns)))

    def encode(self, column: int, value: Cell) -> int:
        mapping = self.codes[column]
        if value in mapping:
            return mapping[value]
        reserved = self.reserved[column] if self.reserved else None
        if reserved is not None:
            return reserved
        raise DataValidationError(
            f"value {value!r} is not in the vocabulary of column {self.columns[column]}"
        )

    def decode(self, column: int, code: int) -> Cell:
        """Return a raw value that encodes back to *code*."""

        reserved = self.reserved[column] if self.reserved else None
        if reserved is not None and code == reserved:
            return None
        for raw, value in self.codes[column].items():
            if value == code:
                return raw
        raise DataValidationError(f"code {code} out of range for column {self.columns[column]}")

    def to_dict(self) -> Dict[str, object]:
        return {
            "columns": [
                {
                    "name": name,
                    "values": [[raw, code] for raw, code in self.codes[idx].items()],
                    "reserved": self.reserved[idx] if self.reserved else None,
                }
                for idx, name in enumerate(self.columns)
            ]
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, object]) -> "Vocabulary":
        entries = list(payload.get("columns", []))  # type: ignore[arg-type]
        return cls(
            columns=[str(entry["name"]) for entry in entries],
            codes=[{raw: int(code) for raw, code in entry["values"]} for entry in entries],
            reserved=[entry.get("reserved") for entry in entries],
        )


@dataclass(frozen=True)
class InstanceTable:
    """Fully encoded instances: categorical codes, numerical values, labels."""

    cat: np.ndarray
    num: np.ndarray
    labels: np.ndarray
    vocab_sizes: Tuple[int, ...]
    cat_names: Tuple[str, ...]
    num_names: Tuple[str, ...] = ()
    mode: Mode = Mode.CTR
    label_name: str = "label"

    def __post_init__(self) -> None:
        m = self.labels.shape[0]
        names = (*self.cat_names, *self.num_names, self.label_name)
        if len(set(names)) != len(names):
            raise DataValidationError(f"table column names must be unique, got {list(names)}")
        if self.cat.shape != (m, len(self.vocab_sizes)):
            raise DataValidationError("categorical matrix shape does not match vocab sizes")
        if self.num.shape[0] != m:
            raise DataValidationError("numerical matrix row count does not match labels")
        if self.cat.size and np.any(self.cat >= np.asarray(self.vocab_sizes, dtype=np.int64)):
            raise DataValidationError("categorical code exceeds its vocabulary size")
        if self.cat.size and np.any(self.cat < 0):
            raise DataValidationError("categorical codes must be non-negative")

    @property
    def m(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_cat(self) -> int:
        return len(self.vocab_sizes)

    @property
    def n_num(self) -> int:
        return int(self.num.shape[1])

    @property
    def task(self) -> Task:
        return Task.BINARY if self.mode is Mode.CTR else Task.REGRESSION


def load_table_schema(path: str | Path) -> TableSchema:
    """Read and validate a JSON schema sidecar."""

    payload = read_json(path, what="schema sidecar")
    if not isinstance(payload, dict):
        raise DataValidationError(f"{path}: schema sidecar must be a JSON object")
    return table_schema_from_mapping(payload, source=str(path))


def table_schema_from_mapping(payload: Mapping[str, object], *, source: str = "schema") -> TableSchema:
    require_valid("table_schema.v1.json", dict(payload), source=source)
    columns = tuple(
        ColumnSpec(name=str(entry["name"]), kind=ColumnKind(entry["kind"]), position=idx)
        for idx, entry in enumerate(payload["columns"])  # type: ignore[union-attr]
    )
    return TableSchema(
        columns=columns,
        mode=Mode(payload["mode"]),
        header=bool(payload.get("header", False)),
        delimiter=str(payload.get("delimiter", "comma")),
        log_base=str(payload.get("log_base", "e")),
        min_count=int(payload.get("min_count", 5)),  # type: ignore[arg-type]
    )


def load_csv(
    path: str | Path,
    schema: Sequence[ColumnSpec],
    *,
    header: bool = False,
    delimiter: str = "comma",
) -> RawTable:
    """Read a delimited file; empty cells become ``None``.

    Row numbers in errors count data rows from 0, excluding the header.
    """

    source = Path(path)
    if not source.is_file():
        raise ArtifactNotFoundError(source, "input table")
    validate_columns(schema)
    width = len(schema)
    sep = "\t" if delimiter == "tab" else ","
    rows: List[Tuple[Cell, ...]] = []
    try:
        with source.open("r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle, delimiter=sep)
            if header:
                names = next(reader, None)
                if names is not None and len(names) != width:
                    raise ParseError(
                        f"{source}: header has {len(names)} columns, schema declares {width}"
                    )
            for index, fields in enumerate(reader):
                if not fields:
                    continue
                if len(fields) != width:
                    raise ParseError(
                        f"{source}: row {index} has {len(fields)} cells, expected {width}",
                        row=index,
                    )
                rows.append(tuple(cell if cell.strip() != "" else None for cell in fields))
    except UnicodeDecodeError as exc:
        raise ParseError(f"{source}: not valid UTF-8 ({exc.reason})") from exc
    except OSError as exc:
        raise DataValidationError(f"{source}: cannot read input ({exc.strerror})") from exc
    increment_counter("ingest.rows", len(rows))
    logger.debug("ingest.load_csv", extra={"path": str(source), "rows": len(rows)})
    return RawTable(schema=tuple(schema), rows=tuple(rows))


def _parse_number(cell: str, *, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: column {column} value {cell!r} is not numeric", row=row) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: column {column} value {cell!r} is not finite", row=row)
    return value


def _first_appearance_codes(values: Sequence[Cell], *, start: int = 0) -> Dict[Cell, int]:
    codes: Dict[Cell, int] = {}
    for value in values:
        if value not in codes:
            codes[value] = start + len(codes)
    return codes


def ctr_transform(value: float, *, log_base: str = "e") -> float:
    """Apply ``int(log(x)^2)`` for ``x > 2``; smaller values pass through floored."""

    if value > _CTR_THRESHOLD:
        return float(int(math.log(value, _LOG_BASES[log_base]) ** 2))
    return float(math.floor(value))


def preprocess_ctr(raw: RawTable, *, log_base: str = "e") -> Tuple[InstanceTable, Vocabulary]:
    """Encode a CTR-mode table: log-square numericals, min-shift, vocabulary codes."""

    if log_base not in _LOG_BASES:
        raise DataValidationError(f"unsupported log base {log_base!r}")
    label_spec = next(col for col in raw.schema if col.kind is ColumnKind.LABEL)
    cat_specs = [col for col in raw.schema if col.kind is ColumnKind.CATEGORICAL]
    num_specs = [col for col in raw.schema if col.kind is ColumnKind.NUMERICAL]
    m = len(raw.rows)

    labels = np.empty(m, dtype=np.float64)
    for row_idx, row in enumerate(raw.rows):
        cell = row[label_spec.position]
        value = None if cell is None else _parse_number(cell, row=row_idx, column=label_spec.name)
        if value not in (0.0, 1.0):
            raise DataValidationError(
                f"row {row_idx}: CTR label must be 0 or 1, got {cell!r}"
            )
        labels[row_idx] = value

    num = np.zeros((m, len(num_specs)), dtype=np.float64)
    for col_idx, spec in enumerate(num_specs):
        for row_idx, row in enumerate(raw.rows):
            cell = row[spec.position]
            value = 0.0 if cell is None else _parse_number(cell, row=row_idx, column=spec.name)
            num[row_idx, col_idx] = ctr_transform(value, log_base=log_base)
        if m:
            num[:, col_idx] -= num[:, col_idx].min()

    vocab = Vocabulary(columns=[spec.name for spec in cat_specs], codes=[], reserved=[])
    cat = np.zeros((m, len(cat_specs)), dtype=np.int64)
    for col_idx, spec in enumerate(cat_specs):
        values = raw.column(spec)
        codes = _first_appearance_codes(values)
        vocab.codes.append(codes)
        vocab.reserved.append(None)
        cat[:, col_idx] = [codes[value] for value in values]

    table = InstanceTable(
        cat=cat,
        num=num,
        labels=labels,
        vocab_sizes=vocab.sizes,
        cat_names=tuple(vocab.columns),
        num_names=tuple(spec.name for spec in num_specs),
        mode=Mode.CTR,
        label_name=label_spec.name,
    )
    logger.info("ingest.preprocess_ctr", extra={"m": m, "vocab_sizes": list(vocab.sizes)})
    return table, vocab


def preprocess_sscl(raw: RawTable, *, min_count: int = 5) -> Tuple[InstanceTable, Vocabulary]:
    """Encode an SSCL-mode table: drop unlabeled rows, merge rare values, mean-impute."""

    label_spec = next(col for col in raw.schema if col.kind is ColumnKind.LABEL)
    cat_specs = [col for col in raw.schema if col.kind is ColumnKind.CATEGORICAL]
    num_specs = [col for col in raw.schema if col.kind is ColumnKind.NUMERICAL]

    kept = [(idx, row) for idx, row in enumerate(raw.rows) if row[label_spec.position] is not None]
    if not kept:
        raise EmptyDataError("every row is missing its label; nothing to preprocess")
    increment_counter("ingest.dropped_unlabeled", len(raw.rows) - len(kept))
    m = len(kept)

    labels = np.empty(m, dtype=np.float64)
    for out_idx, (row_idx, row) in enumerate(kept):
        value = _parse_number(row[label_spec.position] or "", row=row_idx, column=label_spec.name)
        if value < 0:
            raise DataValidationError(f"row {row_idx}: SSCL label must be non-negative, got {value}")
        labels[out_idx] = value

    num = np.empty((m, len(num_specs)), dtype=np.float64)
    for col_idx, spec in enumerate(num_specs):
        cells = [row[spec.position] for _, row in kept]
        parsed = [
            None if cell is None else _parse_number(cell, row=row_idx, column=spec.name)
            for (row_idx, _), cell in zip(kept, cells)
        ]
        present = [value for value in parsed if value is not None]
        # An all-missing column imputes to 0.0.
        mean = math.fsum(present) / len(present) if present else 0.0
        num[:, col_idx] = [mean if value is None else value for value in parsed]

    vocab = Vocabulary(columns=[spec.name for spec in cat_specs], codes=[], reserved=[])
    cat = np.zeros((m, len(cat_specs)), dtype=np.int64)
    for col_idx, spec in enumerate(cat_specs):
        values = [row[spec.position] for _, row in kept]
        counts = Counter(value for value in values if value is not None)
        frequent = [value for value in values if value is not None and counts[value] > min_count]
        codes = _first_appearance_codes(frequent, start=1)
        vocab.codes.append(codes)
        vocab.reserved.append(0)
        cat[:, col_idx] = [codes.get(value, 0) for value in values]

    table = InstanceTable(
        cat=cat,
        num=num,
        labels=labels,
        vocab_sizes=vocab.sizes,
        cat_names=tuple(vocab.columns),
        num_names=tuple(spec.name for spec in num_specs),
        mode=Mode.SSCL,
        label_name=label_spec.name,
    )
    logger.info("ingest.preprocess_sscl", extra={"m": m, "vocab_sizes": list(vocab.sizes)})
    return table, vocab


def preprocess(raw: RawTable, schema: TableSchema) -> Tuple[InstanceTable, Vocabulary]:
    if schema.mode is Mode.CTR:
        return preprocess_ctr(raw, log_base=schema.log_base)
    return preprocess_sscl(raw, min_count=schema.min_count)


def table_frame(table: InstanceTable) -> pd.DataFrame:
    columns: Dict[str, np.ndarray] = {}
    for idx, name in enumerate(table.cat_names):
        columns[name] = table.cat[:, idx]
    for idx, name in enumerate(table.num_names):
        columns[name] = table.num[:, idx]
    columns[table.label_name] = table.labels
    return pd.DataFrame(columns)


def encode_table_csv(table: InstanceTable) -> bytes:
    """Render the encoded table as byte-stable CSV."""

    return frame_csv_bytes(table_frame(table))


def table_fingerprint(table: InstanceTable) -> str:
    return fingerprint(encode_table_csv(table))


def write_table(
    path: str | Path,
    table: InstanceTable,
    *,
    vocab: Optional[Vocabulary] = None,
    config_hash: Optional[str] = None,
    upstream: Optional[Mapping[str, str]] = None,
) -> str:
    """Write ``table.csv`` plus ``table.meta.json`` (and ``vocab.json``); return the fingerprint."""

    target = Path(path)
    data = encode_table_csv(table)
    digest = fingerprint(data)
    atomic_write_bytes(target, data)
    meta: Dict[str, object] = {
        "format": "llpbench.table.v1",
        "mode": table.mode.value,
        "task": table.task.value,
        "m": table.m,
        "cat_names": list(table.cat_names),
        "num_names": list(table.num_names),
        "label_name": table.label_name,
        "vocab_sizes": list(table.vocab_sizes),
        "fingerprint": digest,
    }
    if config_hash is not None:
        meta["config_hash"] = config_hash
    if upstream:
        meta["upstream"] = dict(upstream)
    write_json(meta_path(target), meta)
    if vocab is not None:
        write_json(target.with_name("vocab.json"), vocab.to_dict())
    return digest


def read_vocabulary(table_path: str | Path) -> Optional[Vocabulary]:
    """The ``vocab.json`` written beside an encoded table, if there is one."""

    source = Path(table_path).with_name("vocab.json")
    if not source.is_file():
        return None
    return Vocabulary.from_dict(read_json(source, what="vocabulary"))


def read_table(path: str | Path) -> Tuple[InstanceTable, str]:
    """Load an encoded table and verify it against its metadata fingerprint."""

    source = require_file(path, "encoded table")
    meta = read_json(meta_path(source), what="table metadata")
    data = source.read_bytes()
    digest = fingerprint(data)
    if digest != meta.get("fingerprint"):
        raise ProvenanceError(
            f"{source}: contents do not match {meta_path(source).name}",
            expected=str(meta.get("fingerprint")),
            actual=digest,
        )
    cat_names = tuple(meta["cat_names"])
    num_names = tuple(meta["num_names"])
    dtypes = {name: np.int64 for name in cat_names}
    dtypes.update({name: np.float64 for name in num_names})
    label_name = str(meta.get("label_name", "label"))
    dtypes[label_name] = np.float64
    frame = pd.read_csv(io.BytesIO(data), dtype=dtypes)
    m = len(frame)
    table = InstanceTable(
        cat=frame[list(cat_names)].to_numpy(dtype=np.int64).reshape(m, len(cat_names)),
        num=frame[list(num_names)].to_numpy(dtype=np.float64).reshape(m, len(num_names)),
        labels=frame[label_name].to_numpy(dtype=np.float64),
        vocab_sizes=tuple(int(v) for v in meta["vocab_sizes"]),
        cat_names=cat_names,
        num_names=num_names,
        mode=Mode(meta["mode"]),
        label_name=label_name,
    )
    vocab = read_vocabulary(source)
    if vocab is not None and (tuple(vocab.columns) != cat_names or vocab.sizes != table.vocab_sizes):
        raise DataValidationError(
            f"{source.with_name('vocab.json')}: columns or sizes disagree with {meta_path(source).name}"
        )
    return table, digest


__all__ = [
    "ColumnKind",
    "ColumnSpec",
    "InstanceTable",
    "Mode",
    "RawTable",
    "TableSchema",
    "Task",
    "Vocabulary",
    "ctr_transform",
    "encode_table_csv",
    "load_csv",
    "load_table_schema",
    "preprocess",
    "preprocess_ctr",
    "preprocess_sscl",
    "read_table",
    "read_vocabulary",
    "table_fingerprint",
    "table_frame",
    "table_schema_from_mapping",
    "validate_columns",
    "write_table",
]
