"""Maximal frequent itemset mining over the extraction context, batch and
incremental, plus the persistent knowledge base that carries results across
advisory cycles.

The miner is a depth-first backtracking search in the itemset lattice.  Items
are ordered by ascending support (ties by item id) and re-ordered the same way
at every node.  Two facts keep the search small: support is anti-monotone, so
candidate extensions are filtered level by level against the absolute
threshold; and a branch whose head plus all remaining extensions is covered by
an already-found maximal itemset cannot contribute anything new, so it is
pruned.  Supports come from intersecting per-item transaction bitmasks.

The incremental entry point re-mines the updated context but first re-checks
every previously maximal itemset against the new threshold and seeds the
found-set with the survivors, which lets the pruning rule cut the regions of
the lattice the previous cycle already paid for.  Its result is exactly what
batch mining of the updated context returns.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

from .context import (
    ContextError,
    DeltaBatch,
    EMPTY_DICTIONARY,
    ItemDictionary,
    Transaction,
    TransactionDatabase,
    apply_delta,
)
from .fileio import atomic_write_text
from .schema import AttrId


class MinerError(ValueError):
    pass


class KnowledgeBaseError(ValueError):
    """Knowledge-base file is missing, malformed, or violates an invariant."""


def minsup_fraction(value) -> Fraction:
    """Normalise a minimum-support value to an exact Fraction.

    Floats are interpreted through their decimal string so 0.05 means 1/20;
    binary float error must never shift a ceil() across an integer boundary.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class MiningParameters:
    minsup: Fraction

    def __post_init__(self):
        object.__setattr__(self, "minsup", minsup_fraction(self.minsup))
        if not 0 < self.minsup <= 1:
            raise MinerError(f"minsup must be in (0, 1], got {self.minsup}")

    def absolute_threshold(self, total_weight: int) -> int:
        """ceil(minsup * total_weight), clamped to at least 1."""
        return max(1, math.ceil(self.minsup * total_weight))


@dataclass(frozen=True)
class Itemset:
    """A sorted tuple of item ids; equality and hashing ignore the support."""

    items: tuple[int, ...]
    support: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if list(self.items) != sorted(set(self.items)):
            raise MinerError(f"itemset must be sorted and duplicate-free: {self.items}")
        if self.support is not None and self.support < 0:
            raise MinerError("support must be non-negative")

    def as_set(self) -> frozenset[int]:
        return frozenset(self.items)

    def issubset(self, other: "Itemset") -> bool:
        return self.as_set() <= other.as_set()

    def attributes(self, dictionary: ItemDictionary) -> frozenset[AttrId]:
        return frozenset(dictionary.attr_of(i) for i in self.items)


def _mine(
    database: TransactionDatabase,
    threshold: int,
    seeds: Sequence[tuple[frozenset[int], int]] = (),
) -> frozenset[Itemset]:
    tidsets = database.tidsets
    weigh = database.mask_weight

    root = []
    for item in range(len(database.dictionary)):
        s = weigh(tidsets[item])
        if s >= threshold:
            root.append((item, tidsets[item], s))
    root.sort(key=lambda e: (e[2], e[0]))

    found: list[tuple[frozenset[int], int]] = list(seeds)

    def covered(items: frozenset[int]) -> bool:
        return any(items <= f for f, _ in found)

    def search(head: frozenset[int], head_mask: int, tail: list[tuple[int, int, int]]):
        if covered(head | {e[0] for e in tail}):
            return
        if not tail:
            if head and not covered(head):
                found.append((head, weigh(head_mask)))
            return
        for idx, (item, mask, _s) in enumerate(tail):
            extensions = []
            for other, other_mask, _os in tail[idx + 1 :]:
                m = mask & other_mask
                s = weigh(m)
                if s >= threshold:
                    extensions.append((other, m, s))
            extensions.sort(key=lambda e: (e[2], e[0]))
            search(head | {item}, mask, extensions)

    search(frozenset(), database.all_mask, root)

    # Seeds may have stopped being maximal; keep the antichain only.
    result = []
    for items, sup in found:
        if not any(items < other for other, _ in found):
            result.append(Itemset(tuple(sorted(items)), sup))
    return frozenset(result)


def mine_maximal(
    database: TransactionDatabase, parameters: MiningParameters
) -> frozenset[Itemset]:
    """All maximal frequent (non-empty) itemsets of the database, with supports.

    Every frequent non-empty itemset is a subset of exactly the returned sets;
    no returned set is a subset of another.
    """
    threshold = parameters.absolute_threshold(database.total_weight)
    return _mine(database, threshold)


def brute_force_maximal(
    database: TransactionDatabase,
    parameters: MiningParameters,
    guard_limit: int = 20,
) -> frozenset[Itemset]:
    """Reference implementation by exhaustive subset enumeration.

    Independent of the backtracking search; used as the oracle in tests.
    Refuses databases with more items than guard_limit.
    """
    n = len(database.dictionary)
    if n > guard_limit:
        raise MinerError(f"guard limit exceeded: {n} items > {guard_limit}")
    threshold = parameters.absolute_threshold(database.total_weight)
    tidsets = database.tidsets
    weigh = database.mask_weight

    frequent_items = [i for i in range(n) if weigh(tidsets[i]) >= threshold]
    frequent: list[tuple[frozenset[int], int]] = []
    for bits in range(1, 1 << len(frequent_items)):
        mask = database.all_mask
        members = []
        for pos, item in enumerate(frequent_items):
            if bits >> pos & 1:
                members.append(item)
                mask &= tidsets[item]
        s = weigh(mask)
        if s >= threshold:
            frequent.append((frozenset(members), s))

    maximal = []
    for items, sup in frequent:
        if not any(items < other for other, _ in frequent):
            maximal.append(Itemset(tuple(sorted(items)), sup))
    return frozenset(maximal)


@dataclass(frozen=True)
class MiningOutcome:
    """Classification of the new maximal sets against the previous cycle."""

    emerged: frozenset[Itemset]
    declined: frozenset[Itemset]
    retained: frozenset[Itemset]
    new_maximal: frozenset[Itemset]


def classify(
    old_maximal: frozenset[Itemset],
    new_maximal: frozenset[Itemset],
    current_index_itemsets: frozenset[Itemset] = frozenset(),
) -> MiningOutcome:
    """Split the mining result into emerged / retained / declined itemsets.

    An itemset was frequent before iff it is a subset of some old maximal set,
    and is frequent now iff it is a subset of some new maximal set; frequency
    is never recounted here.  Declined collects previously maximal itemsets
    and currently indexed itemsets that are no longer frequent.
    """
    old_sets = [m.as_set() for m in old_maximal]
    new_sets = [m.as_set() for m in new_maximal]

    emerged = frozenset(
        m for m in new_maximal if not any(m.as_set() <= o for o in old_sets)
    )
    retained = new_maximal - emerged
    # Deduplicate by item identity with old maximal sets taking precedence, so
    # a declined itemset keeps its last known support when one is recorded.
    previously_relevant: dict[tuple[int, ...], Itemset] = {}
    for x in sorted(old_maximal, key=lambda m: m.items):
        previously_relevant.setdefault(x.items, x)
    for x in sorted(current_index_itemsets, key=lambda m: m.items):
        previously_relevant.setdefault(x.items, x)
    declined = frozenset(
        x
        for x in previously_relevant.values()
        if not any(x.as_set() <= n for n in new_sets)
    )
    return MiningOutcome(emerged, declined, retained, new_maximal)


_ISO_FMT = "%Y-%m-%dT%H:%M:%S.%f%z"


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime(_ISO_FMT)


@dataclass(frozen=True)
class KnowledgeBase:
    """Mining state carried between advisory cycles."""

    parameters: MiningParameters
    database: TransactionDatabase
    maximal: frozenset[Itemset]
    version: int = 0
    created_at: str = field(default_factory=_utc_now)
    updated_at: str = field(default_factory=_utc_now)

    @property
    def dictionary(self) -> ItemDictionary:
        return self.database.dictionary

    @property
    def transaction_weight(self) -> int:
        return self.database.total_weight

    def maximal_sorted(self) -> list[Itemset]:
        return sorted(self.maximal, key=lambda m: m.items)


def empty_knowledge_base(minsup) -> KnowledgeBase:
    return KnowledgeBase(
        parameters=MiningParameters(minsup_fraction(minsup)),
        database=TransactionDatabase(EMPTY_DICTIONARY, (), 0),
        maximal=frozenset(),
    )


def mine_incremental(
    kb: KnowledgeBase, delta: DeltaBatch
) -> tuple[MiningOutcome, KnowledgeBase]:
    """Apply a delta, re-mine, classify against the previous maximal sets.

    The absolute threshold is recomputed against the updated total weight.
    Previously maximal itemsets that are still frequent seed the pruning set;
    the result is exactly mine_maximal of the updated database.
    """
    new_db = apply_delta(kb.database, delta)
    threshold = kb.parameters.absolute_threshold(new_db.total_weight)

    seeds = []
    for m in kb.maximal_sorted():
        mask = new_db.all_mask
        for item in m.items:
            mask &= new_db.tidsets.get(item, 0)
            if not mask:
                break
        s = new_db.mask_weight(mask)
        if s >= threshold:
            seeds.append((m.as_set(), s))

    new_maximal = _mine(new_db, threshold, seeds)
    outcome = classify(kb.maximal, new_maximal)
    new_kb = replace(
        kb,
        database=new_db,
        maximal=new_maximal,
        version=kb.version + 1,
        updated_at=_utc_now(),
    )
    return outcome, new_kb


# -- persistence -------------------------------------------------------------


def knowledge_base_to_dict(kb: KnowledgeBase) -> dict:
    return {
        "version": kb.version,
        "minsup": str(kb.parameters.minsup),
        "dictionary": [[a.table, a.attribute] for a in kb.dictionary.attrs],
        "transactions": [
            {"id": t.id, "items": sorted(t.items), "weight": t.weight}
            for t in kb.database.transactions
        ],
        "maximal": [
            {"items": list(m.items), "support": m.support}
            for m in kb.maximal_sorted()
        ],
        "created_at": kb.created_at,
        "updated_at": kb.updated_at,
    }


def save_knowledge_base(kb: KnowledgeBase, path: str) -> None:
    """Serialise atomically: readers always see a complete previous or new file."""
    text = json.dumps(knowledge_base_to_dict(kb), indent=2, sort_keys=True) + "\n"
    atomic_write_text(path, text)


def knowledge_base_from_dict(doc: dict) -> KnowledgeBase:
    try:
        version = doc["version"]
        minsup = doc["minsup"]
        dictionary_raw = doc["dictionary"]
        transactions_raw = doc["transactions"]
        maximal_raw = doc["maximal"]
        updated_at = doc["updated_at"]
    except (KeyError, TypeError) as exc:
        raise KnowledgeBaseError(f"knowledge base file is missing key {exc}") from None
    created_at = doc.get("created_at", updated_at)

    try:
        parameters = MiningParameters(minsup_fraction(minsup))
    except (ValueError, TypeError, ZeroDivisionError, MinerError) as exc:
        raise KnowledgeBaseError(f"invalid minsup {minsup!r}: {exc}") from None

    try:
        dictionary = ItemDictionary(tuple(AttrId(t, a) for t, a in dictionary_raw))
    except (ContextError, TypeError, ValueError) as exc:
        raise KnowledgeBaseError(f"invalid dictionary: {exc}") from None

    n_items = len(dictionary)
    rows = []
    seen_ids = set()
    for t in transactions_raw:
        if not isinstance(t, dict):
            raise KnowledgeBaseError("transaction entries must be objects")
        tid, items, weight = t.get("id"), t.get("items"), t.get("weight", 1)
        if not isinstance(tid, str) or not isinstance(items, list):
            raise KnowledgeBaseError(f"malformed transaction entry: {t!r}")
        if tid in seen_ids:
            raise KnowledgeBaseError(f"duplicate transaction id '{tid}'")
        seen_ids.add(tid)
        if any(not isinstance(i, int) or not 0 <= i < n_items for i in items):
            raise KnowledgeBaseError(f"transaction '{tid}' has out-of-range item ids")
        try:
            rows.append(Transaction(tid, frozenset(items), weight))
        except ContextError as exc:
            raise KnowledgeBaseError(str(exc)) from None
    database = TransactionDatabase(dictionary, tuple(rows), sum(r.weight for r in rows))

    threshold = parameters.absolute_threshold(database.total_weight)
    maximal = []
    for m in maximal_raw:
        if not isinstance(m, dict):
            raise KnowledgeBaseError("maximal entries must be objects")
        items, sup = m.get("items"), m.get("support")
        if not isinstance(items, list) or any(
            not isinstance(i, int) or not 0 <= i < n_items for i in items
        ):
            raise KnowledgeBaseError("maximal itemset has out-of-range item ids")
        if sup is None or sup < threshold:
            raise KnowledgeBaseError(
                f"threshold invariant violated: itemset {items} has support {sup}"
                f" below the absolute threshold {threshold}"
            )
        try:
            maximal.append(Itemset(tuple(sorted(items)), sup))
        except MinerError as exc:
            raise KnowledgeBaseError(str(exc)) from None
    sets = [m.as_set() for m in maximal]
    for i, a in enumerate(sets):
        for j, b in enumerate(sets):
            if i != j and a <= b:
                raise KnowledgeBaseError(
                    f"antichain invariant violated: {sorted(a)} is a subset of {sorted(b)}"
                )

    if not isinstance(version, int) or version < 0:
        raise KnowledgeBaseError(f"invalid version {version!r}")

    return KnowledgeBase(
        parameters=parameters,
        database=database,
        maximal=frozenset(maximal),
        version=version,
        created_at=created_at,
        updated_at=updated_at,
    )


def load_knowledge_base(path: str) -> KnowledgeBase:
    if not os.path.exists(path):
        raise KnowledgeBaseError(f"knowledge base file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise KnowledgeBaseError(f"malformed JSON in {path}: {exc}") from exc
    return knowledge_base_from_dict(doc)
