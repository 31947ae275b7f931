"""Bag construction (feature, random, fixed-size feature) and bag/dataset filters."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..formats.validators import require_valid
from ..utils.errors import DataValidationError, ProvenanceError
from ..utils.hex import fingerprint
from ..utils.io import atomic_write_text, require_file
from ..utils.logging import increment_counter
from .ingest import InstanceTable

logger = logging.getLogger(__name__)

BAG_FORMAT = "llpbench.bags.v1"
MAX_KEY_SIZE = 3


class ProvenanceKind(str, Enum):
    FEATURE = "feature"
    RANDOM = "random"
    FIXED_FEATURE = "fixed_feature"


@dataclass(frozen=True)
class GroupingKey:
    """Ordered categorical column indices (1 to 3 of them)."""

    columns: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.columns) <= MAX_KEY_SIZE:
            raise DataValidationError(
                f"grouping key must have 1..{MAX_KEY_SIZE} columns, got {len(self.columns)}"
            )
        if len(set(self.columns)) != len(self.columns):
            raise DataValidationError(f"grouping key columns must be distinct: {self.columns}")
        if any(col < 0 for col in self.columns):
            raise DataValidationError("grouping key columns must be non-negative")

    def check(self, table: InstanceTable) -> None:
        if any(col >= table.n_cat for col in self.columns):
            raise DataValidationError(
                f"grouping key {self.columns} refers past the {table.n_cat} categorical columns"
            )

    def names(self, table: InstanceTable) -> List[str]:
        return [table.cat_names[col] for col in self.columns]


@dataclass(frozen=True)
class Bag:
    members: Tuple[int, ...]
    label_sum: float

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def proportion(self) -> float:
        return self.label_sum / len(self.members)


@dataclass(frozen=True)
class Provenance:
    kind: ProvenanceKind
    key: Optional[GroupingKey] = None
    q: Optional[int] = None
    seed: Optional[int] = None

    def to_dict(self, table: Optional[InstanceTable] = None) -> Dict[str, object]:
        payload: Dict[str, object] = {"kind": self.kind.value}
        if self.key is not None:
            payload["key"] = list(self.key.columns)
            if table is not None:
                payload["key_names"] = self.key.names(table)
        if self.q is not None:
            payload["q"] = self.q
        if self.seed is not None:
            payload["seed"] = self.seed
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, object]) -> "Provenance":
        key = payload.get("key")
        return cls(
            kind=ProvenanceKind(payload["kind"]),
            key=GroupingKey(tuple(int(c) for c in key)) if key else None,  # type: ignore[union-attr]
            q=int(payload["q"]) if payload.get("q") is not None else None,  # type: ignore[arg-type]
            seed=int(payload["seed"]) if payload.get("seed") is not None else None,  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class BagCollection:
    bags: Tuple[Bag, ...]
    provenance: Provenance
    filter_record: Optional[Tuple[int, Optional[int]]] = None

    def __post_init__(self) -> None:
        if not self.bags:
            return
        members = np.concatenate([np.asarray(bag.members, dtype=np.int64) for bag in self.bags])
        values, counts = np.unique(members, return_counts=True)
        if values.size != members.size:
            raise DataValidationError(
                f"bags must be disjoint; instance {int(values[counts > 1][0])} appears in more than one bag"
            )

    def __len__(self) -> int:
        return len(self.bags)

    @property
    def sizes(self) -> np.ndarray:
        return np.fromiter((bag.size for bag in self.bags), dtype=np.int64, count=len(self.bags))

    @property
    def label_sums(self) -> np.ndarray:
        return np.fromiter((bag.label_sum for bag in self.bags), dtype=np.float64, count=len(self.bags))

    @property
    def proportions(self) -> np.ndarray:
        return self.label_sums / self.sizes

    def members(self) -> np.ndarray:
        """All member indices of surviving bags, ascending."""

        if not self.bags:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate([np.asarray(bag.members, dtype=np.int64) for bag in self.bags]))

    def bag_index(self, m: int) -> np.ndarray:
        """Per-instance bag id (``-1`` for instances outside every bag)."""

        owner = np.full(m, -1, dtype=np.int64)
        for idx, bag in enumerate(self.bags):
            owner[list(bag.members)] = idx
        return owner


def make_bag(table: InstanceTable, members: Iterable[int]) -> Bag:
    ordered = tuple(sorted(int(i) for i in members))
    if not ordered:
        raise DataValidationError("bags must be non-empty")
    if ordered[0] < 0 or ordered[-1] >= table.m:
        raise DataValidationError(f"bag members must lie in [0, {table.m}), got {ordered[0]}..{ordered[-1]}")
    if len(set(ordered)) != len(ordered):
        raise DataValidationError("bag members must be distinct")
    # Summed in ascending member order so re-reading a bag file reproduces the value.
    label_sum = float(np.sum(table.labels[list(ordered)]))
    return Bag(members=ordered, label_sum=label_sum)


def _pool(table: InstanceTable, indices: Optional[Sequence[int]]) -> np.ndarray:
    if indices is None:
        return np.arange(table.m, dtype=np.int64)
    pool = np.asarray(sorted(int(i) for i in indices), dtype=np.int64)
    if pool.size and (pool[0] < 0 or pool[-1] >= table.m):
        raise DataValidationError("instance subset refers outside the table")
    return pool


def group_by_key(
    table: InstanceTable,
    key: GroupingKey,
    *,
    indices: Optional[Sequence[int]] = None,
) -> BagCollection:
    """One bag per distinct key tuple, ordered lexicographically by that tuple."""

    key.check(table)
    pool = _pool(table, indices)
    groups: Dict[Tuple[int, ...], List[int]] = {}
    codes = table.cat[np.ix_(pool, list(key.columns))] if pool.size else np.zeros((0, len(key.columns)), dtype=np.int64)
    for instance, row in zip(pool.tolist(), codes.tolist()):
        groups.setdefault(tuple(row), []).append(instance)
    bags = tuple(make_bag(table, groups[tup]) for tup in sorted(groups))
    increment_counter("bagging.bags", len(bags))
    logger.debug("bagging.group_by_key", extra={"key": list(key.columns), "bags": len(bags)})
    return BagCollection(bags=bags, provenance=Provenance(ProvenanceKind.FEATURE, key=key))


def _check_q(q: int, m: int) -> None:
    if q < 1:
        raise DataValidationError(f"bag size q must be >= 1, got {q}")
    if q > m:
        raise DataValidationError(f"bag size q={q} exceeds the {m} available instances")


def _segment(table: InstanceTable, order: np.ndarray, q: int) -> Tuple[Bag, ...]:
    count = order.size // q
    return tuple(make_bag(table, order[i * q : (i + 1) * q]) for i in range(count))


def random_fixed_bags(
    table: InstanceTable,
    q: int,
    seed: int,
    *,
    indices: Optional[Sequence[int]] = None,
) -> BagCollection:
    """Seeded shuffle cut into ``floor(m / q)`` bags; the remainder is dropped."""

    pool = _pool(table, indices)
    _check_q(q, pool.size)
    rng = np.random.default_rng(seed)
    order = pool[rng.permutation(pool.size)]
    bags = _segment(table, order, q)
    increment_counter("bagging.bags", len(bags))
    return BagCollection(bags=bags, provenance=Provenance(ProvenanceKind.RANDOM, q=q, seed=seed))


def fixed_size_feature_bags(
    table: InstanceTable,
    key: GroupingKey,
    q: int,
    seed: int,
    *,
    indices: Optional[Sequence[int]] = None,
) -> BagCollection:
    """Random ordering with equal-key instances contiguous, cut into ``q``-sized bags."""

    key.check(table)
    pool = _pool(table, indices)
    _check_q(q, pool.size)
    rng = np.random.default_rng(seed)
    grouped = group_by_key(table, key, indices=pool)
    group_order = rng.permutation(len(grouped.bags))
    segments = [
        rng.permutation(np.asarray(grouped.bags[g].members, dtype=np.int64)) for g in group_order
    ]
    order = np.concatenate(segments) if segments else np.zeros(0, dtype=np.int64)
    bags = _segment(table, order, q)
    return BagCollection(
        bags=bags,
        provenance=Provenance(ProvenanceKind.FIXED_FEATURE, key=key, q=q, seed=seed),
    )


def filter_bags(coll: BagCollection, low: int, high: Optional[int]) -> BagCollection:
    """Keep bags with ``low <= size <= high``; ``high=None`` means unbounded."""

    if high is not None and low > high:
        raise DataValidationError(f"low threshold {low} exceeds high threshold {high}")
    kept = tuple(
        bag for bag in coll.bags if bag.size >= low and (high is None or bag.size <= high)
    )
    increment_counter("bagging.filtered_out", len(coll.bags) - len(kept))
    return replace(coll, bags=kept, filter_record=(low, high))


def retained_instance_fraction(coll: BagCollection, table: InstanceTable) -> float:
    if table.m == 0:
        return 0.0
    return float(int(coll.sizes.sum()) / table.m)


def passes_dataset_filter(coll: BagCollection, table: InstanceTable, min_retain: float) -> bool:
    return retained_instance_fraction(coll, table) >= min_retain


def clipping_stats(
    unfiltered: BagCollection, filtered: BagCollection, table: InstanceTable
) -> Dict[str, float | int]:
    """Bag counts before/after filtering with the surviving size distribution."""

    sizes = filtered.sizes
    return {
        "bags_created": len(unfiltered),
        "bags_retained": len(filtered),
        "retained_fraction": retained_instance_fraction(filtered, table),
        "mean_size": float(sizes.mean()) if sizes.size else 0.0,
        "std_size": float(sizes.std()) if sizes.size else 0.0,
    }


def enumerate_candidate_keys(n_cat: int, max_size: int = 2) -> List[GroupingKey]:
    """All keys of size ``1..max_size``, size-major and lexicographic within a size."""

    if n_cat < 1:
        raise DataValidationError("need at least one categorical column")
    if not 1 <= max_size <= MAX_KEY_SIZE:
        raise DataValidationError(f"max_size must be in 1..{MAX_KEY_SIZE}")
    return [
        GroupingKey(combo)
        for size in range(1, max_size + 1)
        for combo in combinations(range(n_cat), size)
    ]


def count_retained(
    table: InstanceTable,
    keys: Sequence[GroupingKey],
    *,
    low: int,
    high: Optional[int],
    min_retain: float,
) -> int:
    """Number of keys whose filtered feature bags pass the dataset filter."""

    return sum(
        1
        for key in keys
        if passes_dataset_filter(filter_bags(group_by_key(table, key), low, high), table, min_retain)
    )


def parse_key(text: str, table: InstanceTable) -> GroupingKey:
    """Parse ``C3,C11`` (column names) or ``2,10`` (categorical positions)."""

    columns: List[int] = []
    for token in (part.strip() for part in text.split(",")):
        if not token:
            continue
        if token in table.cat_names:
            columns.append(table.cat_names.index(token))
        elif token.isdigit():
            columns.append(int(token))
        else:
            raise DataValidationError(f"unknown categorical column {token!r}")
    key = GroupingKey(tuple(columns))
    key.check(table)
    return key


def dataset_id(coll: BagCollection, table: InstanceTable) -> str:
    prov = coll.provenance
    key_part = "-".join(prov.key.names(table)) if prov.key is not None else ""
    if prov.kind is ProvenanceKind.FEATURE:
        return key_part
    if prov.kind is ProvenanceKind.RANDOM:
        return f"random-q{prov.q}"
    return f"{key_part}-q{prov.q}"


def _header(
    coll: BagCollection,
    table: InstanceTable,
    table_fingerprint: str,
    config_hash: Optional[str],
) -> Dict[str, object]:
    header: Dict[str, object] = {
        "format": BAG_FORMAT,
        "dataset_id": dataset_id(coll, table),
        "provenance": coll.provenance.to_dict(table),
        "filter": (
            {"low": coll.filter_record[0], "high": coll.filter_record[1]}
            if coll.filter_record is not None
            else None
        ),
        "m": table.m,
        "num_bags": len(coll),
        "table_fingerprint": table_fingerprint,
    }
    if config_hash is not None:
        header["config_hash"] = config_hash
    return header


def encode_bags(
    coll: BagCollection,
    table: InstanceTable,
    *,
    table_fingerprint: str,
    config_hash: Optional[str] = None,
) -> str:
    lines = [json.dumps(_header(coll, table, table_fingerprint, config_hash), sort_keys=True)]
    for idx, bag in enumerate(coll.bags):
        lines.append(
            json.dumps(
                {"id": idx, "members": list(bag.members), "label_sum": bag.label_sum},
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def write_bags(
    path: str | Path,
    coll: BagCollection,
    table: InstanceTable,
    *,
    table_fingerprint: str,
    config_hash: Optional[str] = None,
) -> str:
    """Write the JSON-lines bag file and return its fingerprint."""

    text = encode_bags(coll, table, table_fingerprint=table_fingerprint, config_hash=config_hash)
    atomic_write_text(path, text)
    return fingerprint(text.encode("utf-8"))


@dataclass
class BagFile:
    header: Dict[str, object]
    collection: BagCollection
    fingerprint: str = field(default="")

    @property
    def dataset_id(self) -> str:
        return str(self.header["dataset_id"])


def read_bags(
    path: str | Path,
    table: InstanceTable,
    *,
    table_fingerprint: Optional[str] = None,
) -> BagFile:
    """Parse a bag file, validating records and (optionally) its table provenance."""

    source = require_file(path, "bag file")
    data = source.read_bytes()
    lines = [line for line in data.decode("utf-8").splitlines() if line.strip()]
    if not lines:
        raise DataValidationError(f"{source}: empty bag file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{source}: invalid JSON line ({exc.msg})") from exc
    require_valid("bag_header.v1.json", header, source=f"{source} header")
    if table_fingerprint is not None and header["table_fingerprint"] != table_fingerprint:
        raise ProvenanceError(
            f"{source}: built from table {header['table_fingerprint']}, "
            f"not the supplied table {table_fingerprint}",
            expected=table_fingerprint,
            actual=str(header["table_fingerprint"]),
        )
    if header["m"] != table.m:
        raise ProvenanceError(
            f"{source}: header records m={header['m']} but the table has {table.m} rows",
            expected=str(table.m),
            actual=str(header["m"]),
        )
    bags: List[Bag] = []
    for record in records:
        require_valid("bag_record.v1.json", record, source=f"{source} bag")
        bag = make_bag(table, record["members"])
        if abs(bag.label_sum - float(record["label_sum"])) > 1e-9 * max(1.0, abs(bag.label_sum)):
            raise DataValidationError(
                f"{source}: bag {record['id']} label_sum disagrees with the table labels"
            )
        bags.append(bag)
    if len(bags) != header["num_bags"]:
        raise DataValidationError(
            f"{source}: header announces {header['num_bags']} bags, found {len(bags)}"
        )
    raw_filter = header.get("filter")
    coll = BagCollection(
        bags=tuple(bags),
        provenance=Provenance.from_dict(header["provenance"]),
        filter_record=(raw_filter["low"], raw_filter["high"]) if raw_filter else None,
    )
    return BagFile(header=header, collection=coll, fingerprint=fingerprint(data))


__all__ = [
    "Bag",
    "BagCollection",
    "BagFile",
    "GroupingKey",
    "Provenance",
    "ProvenanceKind",
    "clipping_stats",
    "count_retained",
    "dataset_id",
    "encode_bags",
    "enumerate_candidate_keys",
    "filter_bags",
    "fixed_size_feature_bags",
    "group_by_key",
    "make_bag",
    "parse_key",
    "passes_dataset_filter",
    "random_fixed_bags",
    "read_bags",
    "retained_instance_fraction",
    "write_bags",
]
