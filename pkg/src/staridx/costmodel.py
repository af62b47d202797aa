"""Page-level cost model for bitmap join indexes over a star schema.

All costs are counted in page accesses.  Scanning a table costs its full page
count.  A query answered without an index scans the fact table and every
joined dimension.  A usable index (one whose attributes all appear in the
query's grouping or restrictions) replaces those scans with:

  - reading the bitmaps for the restricted values the index covers,
  - fetching the qualifying fact rows, estimated with the Cardenas formula
    m * (1 - (1 - 1/m)^k) for k rows spread over m pages,
  - re-scanning the dimensions still needed: every dimension that owns a
    grouping attribute, plus any dimension with a restricted attribute the
    index does not cover.

An index over attributes with distinct-value counts c1..cn stores one fact
bitmap per value combination: size = (prod ci) * ceil(|fact| / 8) bytes; a
combination count above bitmap_limit marks the index infeasible.  Keeping an
index costs maintenance_coefficient * size / page_size pages per cycle.

Selectivity factors are exact rationals (value_count / distinct_values per
restricted attribute the index covers, clamped to 1) so that page ceilings
never shift due to binary float error; only the Cardenas exponential is
evaluated in floating point.  BETWEEN predicates admit an estimated
between_fraction of an attribute's values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .schema import AttrId, StarSchema, page_count
from .workload import (
    AnalyticalQuery,
    BETWEEN,
    WorkloadBatch,
    extract_indexable,
)


class CostModelError(ValueError):
    pass


class InfeasibleIndexError(CostModelError):
    """The itemset's value-combination count exceeds the bitmap limit."""

    def __init__(self, itemset, combinations: int, limit: int):
        super().__init__(
            f"index over {sorted(map(str, itemset))} needs {combinations} bitmaps,"
            f" above the limit {limit}"
        )
        self.combinations = combinations
        self.limit = limit


class IndexNotUsableError(CostModelError):
    """The itemset is not contained in the query's indexable attributes."""


def _rational(value) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class CostParameters:
    """Tuning knobs for the cost model; rationals keep ceilings exact."""

    maintenance_coefficient: Fraction = Fraction(1, 10)
    between_fraction: Fraction = Fraction(1, 10)
    bitmap_limit: int = 2**20

    def __post_init__(self):
        object.__setattr__(
            self, "maintenance_coefficient", _rational(self.maintenance_coefficient)
        )
        object.__setattr__(self, "between_fraction", _rational(self.between_fraction))
        if self.maintenance_coefficient < 0:
            raise CostModelError("maintenance_coefficient must be >= 0")
        if not 0 < self.between_fraction <= 1:
            raise CostModelError("between_fraction must be in (0, 1]")
        if self.bitmap_limit < 1:
            raise CostModelError("bitmap_limit must be >= 1")


DEFAULT_COST_PARAMETERS = CostParameters()


@dataclass(frozen=True, order=True)
class CostEstimate:
    pages: float

    def __post_init__(self):
        if self.pages < 0:
            raise CostModelError("cost cannot be negative")


def bitmap_count(itemset: Iterable[AttrId], schema: StarSchema) -> int:
    """Number of stored bitmaps: the product of the attributes' cardinalities."""
    count = 1
    for attr in itemset:
        count *= schema.attribute_stats(attr).distinct_values
    return count


def index_size(
    itemset: Iterable[AttrId],
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
) -> int:
    """Size in bytes of a bitmap join index over the itemset.

    Each value combination stores one bitmap of |fact| bits.  Raises
    InfeasibleIndexError when the combination count exceeds bitmap_limit.
    """
    itemset = frozenset(itemset)
    if not itemset:
        raise CostModelError("an index needs at least one attribute")
    combos = bitmap_count(itemset, schema)
    if combos > parameters.bitmap_limit:
        raise InfeasibleIndexError(itemset, combos, parameters.bitmap_limit)
    return combos * -(-schema.fact.row_count // 8)


def cardenas_pages(m: int, k: int) -> float:
    """Expected pages touched when fetching k rows spread over m pages.

    Exactly 0 when k = 0; approaches m as k grows.
    """
    if m < 1:
        raise CostModelError(f"page count must be >= 1, got {m}")
    if k < 0:
        raise CostModelError(f"row count must be >= 0, got {k}")
    if k == 0:
        return 0.0
    return m * (1.0 - (1.0 - 1.0 / m) ** k)


def query_cost_unindexed(query: AnalyticalQuery, schema: StarSchema) -> CostEstimate:
    """Full scan of the fact table plus every joined dimension."""
    pages = page_count(schema.fact, schema.page_size)
    for dim in sorted(query.joined_dimensions):
        pages += page_count(schema.dimension(dim), schema.page_size)
    return CostEstimate(float(pages))


def _restriction_value_counts(
    query: AnalyticalQuery, schema: StarSchema, parameters: CostParameters
) -> Mapping[AttrId, Fraction]:
    """Effective admitted-value count per restricted attribute.

    Conjunctions on one attribute cannot admit more values than their tightest
    predicate, so repeated restrictions take the minimum; counts are clamped
    to the attribute's cardinality.
    """
    counts: dict[AttrId, Fraction] = {}
    for r in query.restrictions:
        dv = schema.attribute_stats(r.attribute).distinct_values
        if r.kind == BETWEEN:
            count = parameters.between_fraction * dv
        else:
            count = Fraction(r.value_count)
        count = min(count, Fraction(dv))
        prev = counts.get(r.attribute)
        counts[r.attribute] = count if prev is None else min(prev, count)
    return counts


def query_cost_indexed(
    query: AnalyticalQuery,
    itemset: Iterable[AttrId],
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
) -> CostEstimate:
    """Cost of answering the query through an index over the itemset.

    The itemset must be contained in the query's indexable attributes.
    """
    itemset = frozenset(itemset)
    indexable = extract_indexable(query)
    if not itemset <= indexable:
        raise IndexNotUsableError(
            f"index attributes {sorted(map(str, itemset - indexable))} are not"
            f" indexable attributes of query '{query.id}'"
        )

    counts = _restriction_value_counts(query, schema, parameters)
    covered = sorted(a for a in itemset if a in counts)

    selectivity = Fraction(1)
    for attr in covered:
        selectivity *= counts[attr] / schema.attribute_stats(attr).distinct_values

    fact_rows = schema.fact.row_count
    fact_pages = page_count(schema.fact, schema.page_size)
    qualifying = math.ceil(selectivity * fact_rows)

    bitmap_pages_each = -(-fact_rows // (8 * schema.page_size))
    bitmap_read = sum((counts[a] for a in covered), Fraction(0)) * bitmap_pages_each

    fact_fetch = cardenas_pages(fact_pages, qualifying) if fact_pages else 0.0

    grouped_dims = {a.table for a in query.grouping}
    uncovered_restricted_dims = {
        a.table for a in counts if a not in itemset
    }
    residual = 0
    for dim in sorted(grouped_dims | uncovered_restricted_dims):
        residual += page_count(schema.dimension(dim), schema.page_size)

    return CostEstimate(float(bitmap_read) + fact_fetch + float(residual))


def maintenance_cost(
    itemset: Iterable[AttrId],
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
) -> CostEstimate:
    """Per-cycle upkeep charge: coefficient * index size in pages."""
    size = index_size(itemset, schema, parameters)
    pages = parameters.maintenance_coefficient * Fraction(size, schema.page_size)
    return CostEstimate(float(pages))


def query_best_cost(
    query: AnalyticalQuery,
    configuration: Iterable[frozenset[AttrId]],
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
) -> CostEstimate:
    """min(unindexed, best usable index) for one query, without maintenance."""
    best = query_cost_unindexed(query, schema).pages
    indexable = extract_indexable(query)
    for itemset in configuration:
        if itemset <= indexable:
            cost = query_cost_indexed(query, itemset, schema, parameters).pages
            if cost < best:
                best = cost
    return CostEstimate(best)


def workload_cost(
    batch: WorkloadBatch,
    configuration: Iterable[frozenset[AttrId]],
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
) -> CostEstimate:
    """Weighted access cost of the batch under a configuration, plus upkeep.

    Each query pays the cheaper of a plain scan and its best usable index;
    every index in the configuration pays its maintenance charge whether or
    not any query uses it.
    """
    configuration = [frozenset(i) for i in configuration]
    total = 0.0
    for query in batch.queries:
        total += query.weight * query_best_cost(
            query, configuration, schema, parameters
        ).pages
    for itemset in configuration:
        total += maintenance_cost(itemset, schema, parameters).pages
    return CostEstimate(total)
