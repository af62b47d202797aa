import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from staridx.costmodel import (
    CostEstimate,
    CostModelError,
    CostParameters,
    IndexNotUsableError,
    InfeasibleIndexError,
    bitmap_count,
    cardenas_pages,
    index_size,
    maintenance_cost,
    query_best_cost,
    query_cost_indexed,
    query_cost_unindexed,
    workload_cost,
)
from staridx.schema import AttrId, AttributeStats, StarSchema, TableStats
from staridx.workload import (
    AnalyticalQuery,
    RestrictionPredicate,
    WorkloadBatch,
    BETWEEN,
    EQUALITY,
    IN_LIST,
)

CITY = AttrId("customer", "city")
SEGMENT = AttrId("customer", "segment")
BAND = AttrId("customer", "band")
REGION = AttrId("customer", "region")


@pytest.fixture(scope="module")
def star():
    fact = TableStats(
        "sales", 100_000, 100,
        (AttributeStats("amount", 50_000), AttributeStats("cust_id", 1000)),
    )
    customer = TableStats(
        "customer", 1000, 200,
        (
            AttributeStats("id", 1000),
            AttributeStats("city", 1000),
            AttributeStats("segment", 8),
            AttributeStats("band", 10),
            AttributeStats("region", 4),
        ),
        primary_key="id",
    )
    return StarSchema(fact, (customer,), {"cust_id": ("customer", "id")}, 8192)


def query(grouping=(), restrictions=(), weight=1, qid="q"):
    return AnalyticalQuery(
        id=qid,
        grouping=frozenset(grouping),
        measures=(),
        restrictions=tuple(restrictions),
        joined_dimensions=frozenset({"customer"}),
        weight=weight,
    )


def test_cardenas_known_values():
    assert cardenas_pages(1221, 100) == pytest.approx(96.0522875114199, abs=1e-9)
    assert cardenas_pages(10, 10**6) == pytest.approx(10.0, abs=1e-9)
    assert cardenas_pages(100, 1) == pytest.approx(1.0, abs=1e-6)
    assert cardenas_pages(1, 5) == 1.0
    assert cardenas_pages(500, 0) == 0.0


def test_cardenas_argument_guards():
    with pytest.raises(CostModelError):
        cardenas_pages(0, 5)
    with pytest.raises(CostModelError):
        cardenas_pages(5, -1)


@given(m=st.integers(1, 10_000), k=st.integers(1, 10_000))
def test_cardenas_bounded_and_monotone(m, k):
    pages = cardenas_pages(m, k)
    assert 0 < pages <= m + 1e-9
    assert pages <= cardenas_pages(m, k + 1) + 1e-12
    assert pages <= float(min(m, k)) + 1e-9  # k rows touch at most k pages


def test_index_size_known_values(star):
    # ceil(100000 / 8) = 12500 bytes per bitmap
    assert index_size({BAND}, star) == 10 * 12500 == 125_000
    assert index_size({BAND, REGION}, star) == 40 * 12500 == 500_000
    assert bitmap_count({BAND, REGION}, star) == 40


def test_infeasible_index_is_an_error(star):
    params = CostParameters(bitmap_limit=30)
    with pytest.raises(InfeasibleIndexError) as info:
        index_size({BAND, REGION}, star, params)
    assert info.value.combinations == 40 and info.value.limit == 30
    with pytest.raises(CostModelError, match="at least one attribute"):
        index_size(set(), star)


def test_maintenance_known_value(star):
    # 0.1 * 500000 / 8192 pages, exact in rational arithmetic
    assert maintenance_cost({BAND, REGION}, star).pages == 6.103515625
    zero = CostParameters(maintenance_coefficient=0)
    assert maintenance_cost({BAND, REGION}, star, zero).pages == 0.0


def test_unindexed_scan_cost(star):
    q = query(grouping={SEGMENT}, restrictions=[RestrictionPredicate(CITY, EQUALITY)])
    assert query_cost_unindexed(q, star).pages == 1221 + 25 == 1246


def test_indexed_cost_worked_example(star):
    # index {city}: 1 bitmap read of ceil(100000/65536)=2 pages, 100 qualifying
    # rows via Cardenas over 1221 fact pages, plus the grouped dimension re-scan
    q = query(grouping={SEGMENT}, restrictions=[RestrictionPredicate(CITY, EQUALITY)])
    got = query_cost_indexed(q, {CITY}, star)
    assert got.pages == pytest.approx(2 + 96.0522875114199 + 25, abs=1e-9)


def test_indexed_cost_components(star):
    # IN list admits 3 of 1000 values: 3 bitmaps, 300 qualifying rows
    q = query(restrictions=[RestrictionPredicate(CITY, IN_LIST, 3)])
    got = query_cost_indexed(q, {CITY}, star)
    assert got.pages == pytest.approx(6 + cardenas_pages(1221, 300), abs=1e-9)

    # BETWEEN admits between_fraction of the values: 100 bitmaps here
    q = query(restrictions=[RestrictionPredicate(CITY, BETWEEN)])
    got = query_cost_indexed(q, {CITY}, star)
    assert got.pages == pytest.approx(200 + cardenas_pages(1221, 10_000), abs=1e-9)

    # conjunction on one attribute keeps its tightest predicate
    q = query(
        restrictions=[
            RestrictionPredicate(CITY, IN_LIST, 5),
            RestrictionPredicate(CITY, EQUALITY),
        ]
    )
    got = query_cost_indexed(q, {CITY}, star)
    assert got.pages == pytest.approx(2 + cardenas_pages(1221, 100), abs=1e-9)


def test_value_count_clamped_to_cardinality(star):
    q = query(restrictions=[RestrictionPredicate(REGION, IN_LIST, 99)])
    got = query_cost_indexed(q, {REGION}, star)
    # all 4 region values admitted: selectivity 1, every fact row qualifies
    assert got.pages == pytest.approx(
        4 * 2 + cardenas_pages(1221, 100_000), abs=1e-9
    )


def test_uncovered_restriction_forces_dimension_rescan(star):
    q = query(
        restrictions=[
            RestrictionPredicate(CITY, EQUALITY),
            RestrictionPredicate(BAND, EQUALITY),
        ]
    )
    covered = query_cost_indexed(q, {CITY, BAND}, star).pages
    partial = query_cost_indexed(q, {CITY}, star).pages
    assert partial == pytest.approx(
        2 + cardenas_pages(1221, 100) + 25, abs=1e-9
    )
    assert covered == pytest.approx(
        2 + 2 + cardenas_pages(1221, 10), abs=1e-9
    )
    assert covered < partial


def test_grouping_only_index_reads_no_bitmaps(star):
    # no restriction on the indexed attribute: every row qualifies
    q = query(grouping={SEGMENT})
    got = query_cost_indexed(q, {SEGMENT}, star)
    assert got.pages == pytest.approx(cardenas_pages(1221, 100_000) + 25, abs=1e-9)


def test_unusable_index_rejected(star):
    q = query(grouping={SEGMENT})
    with pytest.raises(IndexNotUsableError, match="customer.city"):
        query_cost_indexed(q, {CITY}, star)


def test_best_cost_never_worse_than_scan(star):
    q = query(grouping={SEGMENT}, restrictions=[RestrictionPredicate(CITY, EQUALITY)])
    scan = query_cost_unindexed(q, star).pages
    best = query_best_cost(q, [{CITY}, {BAND}, {CITY, SEGMENT}], star).pages
    assert best <= scan
    # an empty configuration falls back to the scan
    assert query_best_cost(q, [], star).pages == scan


def test_workload_cost_weights_and_upkeep(star):
    q = query(
        grouping={SEGMENT},
        restrictions=[RestrictionPredicate(CITY, EQUALITY)],
        weight=3,
        qid="w",
    )
    batch = WorkloadBatch((q,))
    base = workload_cost(batch, [], star).pages
    assert base == 3 * 1246
    with_index = workload_cost(batch, [frozenset({CITY})], star).pages
    per_query = query_cost_indexed(q, {CITY}, star).pages
    upkeep = maintenance_cost({CITY}, star).pages
    assert with_index == pytest.approx(3 * per_query + upkeep, abs=1e-9)
    # an index no query can use still charges its upkeep
    unused = workload_cost(batch, [frozenset({BAND})], star).pages
    assert unused == pytest.approx(base + maintenance_cost({BAND}, star).pages)


def test_empty_fact_costs_nothing_to_fetch():
    fact = TableStats("f", 0, 100, (AttributeStats("k", 1),))
    dim = TableStats(
        "d", 10, 100,
        (AttributeStats("id", 10), AttributeStats("x", 5)),
        primary_key="id",
    )
    schema = StarSchema(fact, (dim,), {"k": ("d", "id")}, 8192)
    q = AnalyticalQuery(
        id="q",
        grouping=frozenset(),
        measures=(),
        restrictions=(RestrictionPredicate(AttrId("d", "x"), EQUALITY),),
        joined_dimensions=frozenset({"d"}),
    )
    assert query_cost_indexed(q, {AttrId("d", "x")}, schema).pages == 0.0


def test_cost_estimate_guards():
    with pytest.raises(CostModelError):
        CostEstimate(-0.5)
    assert CostEstimate(1.0) < CostEstimate(2.0)


def test_parameter_validation():
    with pytest.raises(CostModelError):
        CostParameters(maintenance_coefficient=-1)
    with pytest.raises(CostModelError):
        CostParameters(between_fraction=0)
    with pytest.raises(CostModelError):
        CostParameters(bitmap_limit=0)
    p = CostParameters(maintenance_coefficient=0.1, between_fraction=0.25)
    assert p.maintenance_coefficient == Fraction(1, 10)
    assert p.between_fraction == Fraction(1, 4)
