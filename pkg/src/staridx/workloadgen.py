"""Synthetic star-schema workloads for experiments and acceptance checks.

Two generators live here:

  - an evolving five-cycle SQL workload over a retail-style schema with
    planted attribute groups that appear, persist, and disappear, used to
    exercise the full mining -> selection -> DDL pipeline;
  - a dense random transaction context built straight at the context level,
    used for mining performance runs.  Queried attributes in real workloads
    are correlated, so transactions are drawn from a small set of overlapping
    patterns plus noise rather than independent coin flips.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .context import ItemDictionary, Transaction, TransactionDatabase
from .schema import AttrId, AttributeStats, StarSchema, TableStats
from .workload import AnalyticalQuery


def retail_schema() -> StarSchema:
    """Five-dimension sales star used by the evolving-workload scenario."""
    fact = TableStats(
        name="sales",
        row_count=100_000,
        row_width=120,
        attributes=(
            AttributeStats("amount", 50_000),
            AttributeStats("quantity", 100),
            AttributeStats("cust_id", 50_000),
            AttributeStats("prod_id", 10_000),
            AttributeStats("store_id", 800),
            AttributeStats("time_id", 1825),
            AttributeStats("promo_id", 300),
        ),
    )
    dims = (
        TableStats(
            "customer", 50_000, 160,
            (
                AttributeStats("id", 50_000),
                AttributeStats("city", 500),
                AttributeStats("segment", 8),
                AttributeStats("country", 40),
            ),
            primary_key="id",
        ),
        TableStats(
            "product", 10_000, 140,
            (
                AttributeStats("id", 10_000),
                AttributeStats("category", 60),
                AttributeStats("brand", 300),
                AttributeStats("family", 12),
            ),
            primary_key="id",
        ),
        TableStats(
            "store", 800, 120,
            (
                AttributeStats("id", 800),
                AttributeStats("region", 15),
                AttributeStats("store_type", 4),
            ),
            primary_key="id",
        ),
        TableStats(
            "timedim", 1825, 60,
            (
                AttributeStats("id", 1825),
                AttributeStats("month", 60),
                AttributeStats("quarter", 20),
                AttributeStats("year", 5),
                AttributeStats("weekday", 7),
            ),
            primary_key="id",
        ),
        TableStats(
            "promotion", 300, 80,
            (
                AttributeStats("id", 300),
                AttributeStats("campaign", 30),
                AttributeStats("media", 6),
                AttributeStats("discount_band", 5),
            ),
            primary_key="id",
        ),
    )
    join_keys = {
        "cust_id": ("customer", "id"),
        "prod_id": ("product", "id"),
        "store_id": ("store", "id"),
        "time_id": ("timedim", "id"),
        "promo_id": ("promotion", "id"),
    }
    return StarSchema(fact, dims, join_keys)


_ALIAS = {
    "customer": "c",
    "product": "p",
    "store": "st",
    "timedim": "t",
    "promotion": "pr",
}
_FK = {
    "customer": "cust_id",
    "product": "prod_id",
    "store": "store_id",
    "timedim": "time_id",
    "promotion": "promo_id",
}


def _star_query(group_by: AttrId | None, restriction: AttrId, literal: str) -> str:
    tables = {restriction.table}
    if group_by is not None:
        tables.add(group_by.table)
    dims = sorted(tables)
    froms = ", ".join(["sales s"] + [f"{d} {_ALIAS[d]}" for d in dims])
    joins = " AND ".join(f"s.{_FK[d]} = {_ALIAS[d]}.id" for d in dims)
    where = f"{joins} AND {_ALIAS[restriction.table]}.{restriction.attribute} = {literal}"
    select = "SUM(s.amount)"
    tail = ""
    if group_by is not None:
        col = f"{_ALIAS[group_by.table]}.{group_by.attribute}"
        select = f"{col}, SUM(s.amount)"
        tail = f" GROUP BY {col}"
    return f"SELECT {select} FROM {froms} WHERE {where}{tail};"


# Planted attribute groups: (grouping attribute, restricted attribute).
BASE_GROUP = frozenset({AttrId("customer", "segment"), AttrId("customer", "city")})
EMERGING_GROUPS = (
    frozenset({AttrId("product", "family"), AttrId("product", "brand")}),
    frozenset({AttrId("store", "region"), AttrId("timedim", "month")}),
)

_PLANTED = {
    BASE_GROUP: (AttrId("customer", "segment"), AttrId("customer", "city")),
    EMERGING_GROUPS[0]: (AttrId("product", "family"), AttrId("product", "brand")),
    EMERGING_GROUPS[1]: (AttrId("store", "region"), AttrId("timedim", "month")),
}

# Attributes for one-off noise queries; disjoint from every planted group so
# noise can never manufacture a frequent superset of a planted itemset.
_NOISE_ATTRS = (
    AttrId("customer", "country"),
    AttrId("product", "category"),
    AttrId("store", "store_type"),
    AttrId("timedim", "weekday"),
    AttrId("timedim", "year"),
    AttrId("timedim", "quarter"),
    AttrId("promotion", "media"),
    AttrId("promotion", "discount_band"),
    AttrId("promotion", "campaign"),
)


def _group_queries(group: frozenset[AttrId], count: int, cycle: int) -> list[str]:
    group_by, restricted = _PLANTED[group]
    return [
        _star_query(group_by, restricted, f"'v{cycle}_{i}'")
        for i in range(count)
    ]


def _noise_queries(count: int, cycle: int) -> list[str]:
    out = []
    for i in range(count):
        attr = _NOISE_ATTRS[(i + cycle) % len(_NOISE_ATTRS)]
        out.append(_star_query(None, attr, f"'n{cycle}_{i}'"))
    return out


def scenario_workloads(queries_per_cycle: int = 30) -> list[str]:
    """Five workload texts.  The base group runs throughout; the emerging
    groups appear in the second workload, persist through the fourth, and are
    gone in the fifth."""
    if queries_per_cycle < 20:
        raise ValueError("scenario needs at least 20 queries per cycle")
    texts = []
    for cycle in range(1, 6):
        statements: list[str] = []
        statements += _group_queries(BASE_GROUP, 6, cycle)
        if 2 <= cycle <= 4:
            for group in EMERGING_GROUPS:
                statements += _group_queries(group, 5, cycle)
        statements += _noise_queries(queries_per_cycle - len(statements), cycle)
        texts.append("\n".join(statements) + "\n")
    return texts


@dataclass(frozen=True)
class DenseContextSpec:
    transactions: int = 10_000
    items: int = 64
    patterns: int = 8
    pattern_size: tuple[int, int] = (8, 14)
    noise_items: int = 2
    seed: int = 2026


def dense_context(spec: DenseContextSpec = DenseContextSpec()) -> TransactionDatabase:
    """Correlated dense context: each transaction is one pattern plus noise."""
    rng = random.Random(spec.seed)
    universe = list(range(spec.items))
    patterns = []
    for _ in range(spec.patterns):
        size = rng.randint(*spec.pattern_size)
        patterns.append(frozenset(rng.sample(universe, size)))
    rows = []
    for pos in range(spec.transactions):
        base = patterns[rng.randrange(len(patterns))]
        noise = frozenset(rng.sample(universe, spec.noise_items))
        rows.append(Transaction(f"t{pos:06d}", base | noise))
    dictionary = ItemDictionary(
        tuple(AttrId("dim", f"a{item:03d}") for item in range(spec.items))
    )
    return TransactionDatabase(dictionary, tuple(rows), len(rows))


def dense_context_rows(
    spec: DenseContextSpec, start: int, count: int
) -> list[Transaction]:
    """Extra rows drawn from the same pattern family, ids disjoint from the
    base context (positions start at `start`)."""
    rng = random.Random(spec.seed + 1 + start)
    universe = list(range(spec.items))
    patterns = []
    pattern_rng = random.Random(spec.seed)
    for _ in range(spec.patterns):
        size = pattern_rng.randint(*spec.pattern_size)
        patterns.append(frozenset(pattern_rng.sample(universe, size)))
    rows = []
    for pos in range(start, start + count):
        base = patterns[rng.randrange(len(patterns))]
        noise = frozenset(rng.sample(universe, spec.noise_items))
        rows.append(Transaction(f"t{pos:06d}", base | noise))
    return rows


def rows_as_queries(
    rows: list[Transaction], dictionary: ItemDictionary
) -> tuple[AnalyticalQuery, ...]:
    """Wrap raw transactions as grouping-only queries, so row-level contexts
    can flow through the same delta pipeline the advisor uses."""
    queries = []
    for row in rows:
        attrs = frozenset(dictionary.attr_of(i) for i in row.items)
        queries.append(
            AnalyticalQuery(
                id=row.id,
                grouping=attrs,
                measures=(),
                restrictions=(),
                joined_dimensions=frozenset(a.table for a in attrs),
                weight=row.weight,
            )
        )
    return tuple(queries)
