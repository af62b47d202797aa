"""Binary extraction context: queries as weighted transactions over attributes.

Each query contributes one transaction whose items are the integer ids of its
indexable attributes.  The item dictionary is an append-only bijection between
ids and attribute identities, so ids stay stable across incremental updates.
Transactions are stored horizontally (frozensets of item ids) and, for mining,
vertically as one transaction-position bitmask per item; a transaction's
weight multiplies its contribution to every support count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .schema import AttrId
from .workload import AnalyticalQuery, WorkloadBatch, extract_indexable

log = logging.getLogger(__name__)


class ContextError(ValueError):
    pass


@dataclass(frozen=True)
class ItemDictionary:
    """Append-only bijection item id <-> attribute identity."""

    attrs: tuple[AttrId, ...] = ()

    def __post_init__(self):
        if len(set(self.attrs)) != len(self.attrs):
            raise ContextError("item dictionary attributes must be distinct")

    @cached_property
    def _ids(self) -> Mapping[AttrId, int]:
        return {a: i for i, a in enumerate(self.attrs)}

    def __len__(self) -> int:
        return len(self.attrs)

    def __contains__(self, attr: AttrId) -> bool:
        return attr in self._ids

    def id_of(self, attr: AttrId) -> int:
        try:
            return self._ids[attr]
        except KeyError:
            raise ContextError(f"attribute {attr} is not in the dictionary") from None

    def attr_of(self, item: int) -> AttrId:
        if not 0 <= item < len(self.attrs):
            raise ContextError(f"item id {item} out of range")
        return self.attrs[item]

    def extended(self, new_attrs: Iterable[AttrId]) -> "ItemDictionary":
        """Return a dictionary with unseen attributes appended in given order."""
        fresh = [a for a in new_attrs if a not in self._ids]
        if not fresh:
            return self
        return ItemDictionary(self.attrs + tuple(dict.fromkeys(fresh)))


EMPTY_DICTIONARY = ItemDictionary()


@dataclass(frozen=True)
class Transaction:
    id: str
    items: frozenset[int]
    weight: int = 1

    def __post_init__(self):
        if self.weight < 1:
            raise ContextError(f"transaction '{self.id}' weight must be >= 1")


@dataclass(frozen=True)
class TransactionDatabase:
    dictionary: ItemDictionary
    transactions: tuple[Transaction, ...]
    total_weight: int
    # Vertical form carried over from a parent database on append-only deltas;
    # None means "derive lazily from the rows".
    _seed_tidsets: Mapping[int, int] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if self.total_weight != sum(t.weight for t in self.transactions):
            raise ContextError("total_weight does not match transaction weights")

    @cached_property
    def _weights(self) -> tuple[int, ...]:
        return tuple(t.weight for t in self.transactions)

    @cached_property
    def _uniform(self) -> bool:
        return all(w == 1 for w in self._weights)

    @cached_property
    def all_mask(self) -> int:
        return (1 << len(self.transactions)) - 1

    @cached_property
    def tidsets(self) -> Mapping[int, int]:
        """Per-item bitmask over transaction positions."""
        if self._seed_tidsets is not None:
            return self._seed_tidsets
        masks: dict[int, int] = {}
        size = len(self.dictionary)
        buffers = {}
        for pos, t in enumerate(self.transactions):
            byte, bit = pos >> 3, pos & 7
            for item in t.items:
                buf = buffers.get(item)
                if buf is None:
                    buf = buffers[item] = bytearray((len(self.transactions) + 7) >> 3)
                buf[byte] |= 1 << bit
        for item in range(size):
            buf = buffers.get(item)
            masks[item] = int.from_bytes(buf, "little") if buf is not None else 0
        return masks

    def mask_weight(self, mask: int) -> int:
        """Total weight of the transactions selected by a position bitmask."""
        if self._uniform:
            return mask.bit_count()
        total = 0
        weights = self._weights
        while mask:
            lsb = mask & -mask
            total += weights[lsb.bit_length() - 1]
            mask ^= lsb
        return total


def support(database: TransactionDatabase, items: Iterable[int]) -> int:
    """Weighted support of an itemset; support of the empty set is total_weight."""
    mask = database.all_mask
    for item in set(items):
        if not 0 <= item < len(database.dictionary):
            raise ContextError(f"item id {item} out of range")
        mask &= database.tidsets.get(item, 0)
        if not mask:
            return 0
    return database.mask_weight(mask)


def _transaction_of(query: AnalyticalQuery, dictionary: ItemDictionary) -> Transaction:
    items = frozenset(dictionary.id_of(a) for a in extract_indexable(query))
    return Transaction(query.id, items, query.weight)


def build_context(
    batch: WorkloadBatch, dictionary: ItemDictionary = EMPTY_DICTIONARY
) -> TransactionDatabase:
    """Turn a workload batch into a transaction database.

    New attributes are appended to the dictionary in order of first appearance
    (attributes of each query in sorted order, queries in batch order), which
    makes item ids deterministic for identical input.
    """
    for q in batch.queries:
        dictionary = dictionary.extended(sorted(extract_indexable(q)))
    rows = []
    seen = set()
    for q in batch.queries:
        if q.id in seen:
            raise ContextError(f"duplicate transaction id '{q.id}'")
        seen.add(q.id)
        rows.append(_transaction_of(q, dictionary))
    return TransactionDatabase(dictionary, tuple(rows), sum(r.weight for r in rows))


@dataclass(frozen=True)
class DeltaBatch:
    """One update step: queries to add and transaction ids to retire."""

    added: WorkloadBatch
    removed_ids: frozenset[str] = frozenset()

    def __post_init__(self):
        overlap = self.removed_ids & {q.id for q in self.added.queries}
        if overlap:
            raise ContextError(
                f"delta adds and removes the same id(s): {sorted(overlap)}"
            )

    def is_empty(self) -> bool:
        return not self.added.queries and not self.removed_ids


def apply_delta(database: TransactionDatabase, delta: DeltaBatch) -> TransactionDatabase:
    """Apply (D u d+) - d- and return the new database.

    Unknown removed ids are logged and ignored; an added query whose id is
    already live is an error.  Removals never shrink the dictionary: an item
    left with zero occurrences keeps its id.  Pure additions carry the parent
    database's vertical structures forward instead of rebuilding them.
    """
    live_ids = {t.id for t in database.transactions}
    unknown = delta.removed_ids - live_ids
    if unknown:
        log.warning("ignoring %d unknown removed id(s): %s", len(unknown), sorted(unknown)[:5])

    collisions = live_ids - delta.removed_ids
    added_ids = {q.id for q in delta.added.queries}
    clash = added_ids & collisions
    if clash:
        raise ContextError(
            f"added id(s) collide with retained transactions: {sorted(clash)[:5]}"
        )
    if len(added_ids) != len(delta.added.queries):
        raise ContextError("added batch contains duplicate ids")

    dictionary = database.dictionary
    for q in delta.added.queries:
        dictionary = dictionary.extended(sorted(extract_indexable(q)))

    added_rows = tuple(_transaction_of(q, dictionary) for q in delta.added.queries)

    if not delta.removed_ids & live_ids:
        # append-only: positions of existing rows are preserved, so the parent
        # tidsets can be extended instead of recomputed
        rows = database.transactions + added_rows
        base = len(database.transactions)
        seeds = dict(database.tidsets)
        for offset, row in enumerate(added_rows):
            bit = 1 << (base + offset)
            for item in row.items:
                seeds[item] = seeds.get(item, 0) | bit
        for item in range(len(dictionary)):
            seeds.setdefault(item, 0)
        return TransactionDatabase(
            dictionary, rows, database.total_weight + sum(r.weight for r in added_rows),
            _seed_tidsets=seeds,
        )

    retained = tuple(t for t in database.transactions if t.id not in delta.removed_ids)
    rows = retained + added_rows
    return TransactionDatabase(dictionary, rows, sum(r.weight for r in rows))
