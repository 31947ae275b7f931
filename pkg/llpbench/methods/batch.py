"""Minibatch of bags flattened into per-instance prediction slots."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..stages.bagging import Bag
from ..stages.ingest import InstanceTable
from ..stages.model import multihot_batch
from ..utils.errors import EmptyDataError


@dataclass(frozen=True)
class BagBatch:
    """``k`` bags; instance slot ``i`` belongs to bag ``owner[i]``."""

    sizes: np.ndarray
    label_sums: np.ndarray
    owner: np.ndarray
    members: np.ndarray
    x: Optional[np.ndarray] = None
    bag_ids: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return int(self.sizes.shape[0])

    @property
    def n(self) -> int:
        return int(self.owner.shape[0])

    @property
    def proportions(self) -> np.ndarray:
        return self.label_sums / self.sizes

    @property
    def ids(self) -> np.ndarray:
        """Position of each batch bag in the collection it was drawn from."""

        return np.arange(self.k) if self.bag_ids is None else self.bag_ids

    def bag_sums(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.owner, weights=values, minlength=self.k)

    def bag_means(self, values: np.ndarray) -> np.ndarray:
        return self.bag_sums(values) / self.sizes

    def spread(self, per_bag: np.ndarray) -> np.ndarray:
        """Broadcast a per-bag value to every member slot."""

        return per_bag[self.owner]

    @classmethod
    def from_arrays(
        cls,
        sizes: Sequence[int],
        label_sums: Sequence[float],
        x: Optional[np.ndarray] = None,
    ) -> "BagBatch":
        """Batch over consecutive slots: the first ``sizes[0]`` rows form bag 0, and so on."""

        size_array = np.asarray(sizes, dtype=np.int64)
        if size_array.size == 0 or np.any(size_array < 1):
            raise EmptyDataError("a batch needs at least one non-empty bag")
        owner = np.repeat(np.arange(size_array.size), size_array)
        return cls(
            sizes=size_array,
            label_sums=np.asarray(label_sums, dtype=np.float64),
            owner=owner,
            members=np.arange(owner.size, dtype=np.int64),
            x=None if x is None else np.asarray(x, dtype=np.float64),
        )

    @classmethod
    def from_bags(
        cls,
        table: InstanceTable,
        bags: Sequence[Bag],
        *,
        with_inputs: bool = True,
        bag_ids: Optional[Sequence[int]] = None,
    ) -> "BagBatch":
        if not bags:
            raise EmptyDataError("a batch needs at least one bag")
        if bag_ids is not None and len(bag_ids) != len(bags):
            raise ValueError(f"{len(bag_ids)} bag ids for {len(bags)} bags")
        members = np.concatenate([np.asarray(bag.members, dtype=np.int64) for bag in bags])
        sizes = np.fromiter((bag.size for bag in bags), dtype=np.int64, count=len(bags))
        return cls(
            sizes=sizes,
            label_sums=np.fromiter((bag.label_sum for bag in bags), dtype=np.float64, count=len(bags)),
            owner=np.repeat(np.arange(len(bags)), sizes),
            members=members,
            x=multihot_batch(table, members) if with_inputs else None,
            bag_ids=None if bag_ids is None else np.asarray(bag_ids, dtype=np.int64),
        )


__all__ = ["BagBatch"]
