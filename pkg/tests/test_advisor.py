import json
import re

import pytest

from staridx.advisor import (
    AdvisorError,
    CandidateIndex,
    EMPTY_CONFIGURATION,
    IndexConfiguration,
    diff_configurations,
    emit_ddl,
    generate_candidates,
    index_name,
    make_candidate,
    recommendation_to_dict,
    select_configuration,
    select_configuration_traced,
)
from staridx.costmodel import CostParameters, workload_cost
from staridx.miner import Itemset, MiningOutcome
from staridx.schema import AttrId
from staridx.workload import RestrictionPredicate, AnalyticalQuery, WorkloadBatch, EQUALITY
from staridx.context import ItemDictionary


SEG = AttrId("customer", "segment")
CITY = AttrId("customer", "city")
REGION = AttrId("store", "region")
MONTH = AttrId("timedim", "month")


def restriction_query(qid, attrs, weight=1):
    return AnalyticalQuery(
        id=qid,
        grouping=frozenset(),
        measures=(),
        restrictions=tuple(RestrictionPredicate(a, EQUALITY) for a in attrs),
        joined_dimensions=frozenset(a.table for a in attrs),
        weight=weight,
    )


def test_index_name_shape(schema):
    name = index_name([SEG], schema)
    assert name == "bji_sales_customer_segment"
    assert index_name([CITY, SEG], schema) == index_name([SEG, CITY], schema)


def test_index_name_length_cap(schema):
    name = index_name([CITY, SEG, REGION, MONTH], schema)
    assert len(name) <= 30
    assert re.fullmatch(r"[A-Za-z0-9_]+", name)
    # the hash suffix keeps long names collision-resistant and stable
    again = index_name([MONTH, REGION, SEG, CITY], schema)
    assert name == again
    other = index_name([CITY, SEG, REGION], schema)
    assert other != name


def test_make_candidate_flags_infeasible(schema):
    params = CostParameters(bitmap_limit=100)
    c = make_candidate({CITY, SEG}, schema, params)  # 500 * 8 combinations
    assert not c.feasible
    assert c.size_bytes == 4000 * 12500
    ok = make_candidate({SEG}, schema, params)
    assert ok.feasible and ok.size_bytes == 8 * 12500


def test_candidate_validation():
    with pytest.raises(AdvisorError, match="sorted"):
        CandidateIndex((SEG, CITY), 1, "x")  # city sorts before segment
    with pytest.raises(AdvisorError, match="at least one"):
        CandidateIndex((), 1, "x")


def test_configuration_rejects_duplicate_itemsets(schema):
    a = make_candidate({SEG}, schema)
    b = CandidateIndex(a.attributes, a.size_bytes + 1, "other_name")
    with pytest.raises(AdvisorError, match="one itemset"):
        IndexConfiguration(frozenset({a, b}))


def test_generate_candidates_formula(schema):
    dictionary = ItemDictionary((SEG, CITY, REGION, MONTH))
    current = IndexConfiguration(
        frozenset({make_candidate({SEG}, schema), make_candidate({REGION}, schema)})
    )
    outcome = MiningOutcome(
        emerged=frozenset({Itemset((1,), 5), Itemset((3,), 4)}),  # city, month
        declined=frozenset({Itemset((2,), 1)}),  # region
        retained=frozenset(),
        new_maximal=frozenset(),
    )
    got = generate_candidates(outcome, current, schema, dictionary)
    assert {c.itemset for c in got} == {
        frozenset({SEG}),
        frozenset({CITY}),
        frozenset({MONTH}),
    }


def make_pool(schema):
    return [
        make_candidate({SEG}, schema),
        make_candidate({CITY}, schema),
        make_candidate({REGION}, schema),
    ]


def test_selection_respects_budget(schema):
    batch = WorkloadBatch(
        (
            restriction_query("q1", [SEG], weight=5),
            restriction_query("q2", [CITY], weight=5),
            restriction_query("q3", [REGION], weight=5),
        )
    )
    pool = make_pool(schema)
    everything = select_configuration(pool, batch, schema, budget=10**9)
    assert everything.itemsets() == {frozenset({SEG}), frozenset({CITY}), frozenset({REGION})}

    seg_size = make_candidate({SEG}, schema).size_bytes
    tight = select_configuration(pool, batch, schema, budget=seg_size)
    assert tight.total_size <= seg_size
    assert len(tight.indexes) == 1

    nothing = select_configuration(pool, batch, schema, budget=0)
    assert nothing == EMPTY_CONFIGURATION


def test_selection_trace_descends_strictly(schema):
    batch = WorkloadBatch(
        (
            restriction_query("q1", [SEG], weight=4),
            restriction_query("q2", [CITY, SEG], weight=2),
        )
    )
    config, trace = select_configuration_traced(
        make_pool(schema), batch, schema, budget=10**9
    )
    costs = [workload_cost(batch, [], schema).pages]
    for step in trace:
        assert step.cost_after < step.cost_before
        assert step.cost_before == pytest.approx(costs[-1])
        costs.append(step.cost_after)
    assert workload_cost(
        batch, sorted(config.itemsets(), key=sorted), schema
    ).pages == pytest.approx(costs[-1])


def test_selection_skips_unhelpful_and_infeasible(schema):
    # region serves no query; the pair index is infeasible under a tiny limit
    params = CostParameters(bitmap_limit=100)
    batch = WorkloadBatch((restriction_query("q1", [SEG], weight=3),))
    pool = [
        make_candidate({SEG}, schema, params),
        make_candidate({REGION}, schema, params),
        make_candidate({CITY, SEG}, schema, params),
    ]
    config = select_configuration(pool, batch, schema, params, budget=10**9)
    assert config.itemsets() == {frozenset({SEG})}


def test_selection_rejects_negative_budget(schema):
    with pytest.raises(AdvisorError, match="budget"):
        select_configuration([], WorkloadBatch(()), schema, budget=-1)


def test_diff_by_itemset_identity(schema):
    seg = make_candidate({SEG}, schema)
    city = make_candidate({CITY}, schema)
    region = make_candidate({REGION}, schema)
    before = IndexConfiguration(frozenset({seg, city}))
    after = IndexConfiguration(frozenset({city, region}))
    diff = diff_configurations(before, after)
    assert diff.to_create == frozenset({region})
    assert diff.to_drop == frozenset({seg})
    empty = diff_configurations(before, before)
    assert empty.to_create == empty.to_drop == frozenset()


def test_ddl_text_is_byte_stable(schema):
    seg = make_candidate({SEG}, schema)
    pair = make_candidate({REGION, MONTH}, schema)
    old = make_candidate({CITY}, schema)
    diff = diff_configurations(
        IndexConfiguration(frozenset({old})),
        IndexConfiguration(frozenset({seg, pair})),
    )
    got = emit_ddl(diff, schema)
    assert got == (
        "DROP INDEX bji_sales_customer_city;\n"
        "CREATE BITMAP INDEX bji_sales_customer_segment ON sales(customer.segment)"
        " FROM sales, customer WHERE sales.cust_id = customer.id;\n"
        "CREATE BITMAP INDEX bji_sales_store_regio_590d269a"
        " ON sales(store.region, timedim.month)"
        " FROM sales, store, timedim"
        " WHERE sales.store_id = store.id AND sales.time_id = timedim.id;\n"
    )
    assert emit_ddl(diff_configurations(EMPTY_CONFIGURATION, EMPTY_CONFIGURATION), schema) == ""


def test_scenario_reports_are_deterministic(scenario_run):
    recs = [r.recommendation for r in scenario_run]
    kbs = [r.kb_after for r in scenario_run]
    for rec, kb in zip(recs, kbs):
        a = recommendation_to_dict(rec, kb.dictionary, cycle=1)
        b = recommendation_to_dict(rec, kb.dictionary, cycle=1)
        a.pop("timings_ms"), b.pop("timings_ms")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
        assert all(
            entry["attributes"] == sorted(entry["attributes"])
            for entry in a["emerged"] + a["declined"] + a["retained"]
        )


def test_run_cycle_reports_timings_and_dropped_benefit(scenario_run):
    for record in scenario_run:
        t = record.recommendation.timings_ms
        assert {"mine_ms", "classify_ms", "candidates_ms", "select_ms", "diff_ms", "total_ms"} <= set(t)
        assert all(v >= 0 for v in t.values())
    # every dropped-but-beneficial name must be a real dropped index
    for record in scenario_run:
        dropped = {c.name for c in record.recommendation.diff.to_drop}
        assert set(record.recommendation.dropped_beneficial) <= dropped
