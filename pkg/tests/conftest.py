"""Shared fixtures: the retail scenario run once per session, plus small
hand-built schemas and databases the unit tests poke at."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import pytest

from staridx import (
    AnalyticalQuery,
    AttrId,
    DeltaBatch,
    EMPTY_CONFIGURATION,
    ItemDictionary,
    Transaction,
    TransactionDatabase,
    WorkloadBatch,
    empty_knowledge_base,
    parse_workload,
    run_cycle,
    with_id_prefix,
)
from staridx.costmodel import CostParameters
from staridx.workloadgen import retail_schema, scenario_workloads


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One visible pass/fail line per acceptance criterion."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            if "test_acceptance" in rep.nodeid:
                rows.append((rep.nodeid.split("::")[-1], outcome))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in sorted(rows):
            mark = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"{mark}  {name}")


def make_query(qid: str, attrs, weight: int = 1) -> AnalyticalQuery:
    """Grouping-only query over arbitrary attribute ids, for context tests."""
    attrs = frozenset(attrs)
    return AnalyticalQuery(
        id=qid,
        grouping=attrs,
        measures=(),
        restrictions=(),
        joined_dimensions=frozenset(a.table for a in attrs),
        weight=weight,
    )


def make_db(rows, n_items: int, table: str = "d") -> TransactionDatabase:
    """Database over items a0..a<n-1>; rows are (id, item-id-set[, weight])."""
    dictionary = ItemDictionary(tuple(AttrId(table, f"a{i}") for i in range(n_items)))
    txns = []
    for row in rows:
        rid, items = row[0], frozenset(row[1])
        weight = row[2] if len(row) > 2 else 1
        txns.append(Transaction(rid, items, weight))
    return TransactionDatabase(dictionary, tuple(txns), sum(t.weight for t in txns))


@pytest.fixture(scope="session")
def schema():
    return retail_schema()


@pytest.fixture(scope="session")
def scenario_texts():
    return scenario_workloads()


@pytest.fixture(scope="session")
def scenario_batches(schema, scenario_texts):
    batches = []
    for cycle, text in enumerate(scenario_texts, 1):
        batch = parse_workload(text, schema, source=f"cycle{cycle}")
        assert batch.skipped == 0, "scenario fixture must parse completely"
        batches.append(with_id_prefix(batch, f"c{cycle:04d}/"))
    return batches


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    recommendation: object
    kb_before: object
    kb_after: object
    config_before: object
    config_after: object
    workload: WorkloadBatch


@pytest.fixture(scope="session")
def scenario_run(schema, scenario_batches):
    """The five-cycle advisory loop, run once; each cycle replaces the last."""
    params = CostParameters()
    budget = 256 * 1024 ** 2
    kb = empty_knowledge_base(Fraction(1, 20))
    config = EMPTY_CONFIGURATION
    prev_ids: frozenset[str] = frozenset()
    records = []
    for cycle, batch in enumerate(scenario_batches, 1):
        delta = DeltaBatch(added=batch, removed_ids=prev_ids)
        workload = WorkloadBatch(batch.queries, source=f"cycle{cycle}")
        rec, new_kb, new_config = run_cycle(
            kb, delta, config, workload, schema, params, budget
        )
        records.append(
            CycleRecord(cycle, rec, kb, new_kb, config, new_config, workload)
        )
        kb, config = new_kb, new_config
        prev_ids = frozenset(q.id for q in batch.queries)
    return records


def attr_sets(itemsets, dictionary) -> set[frozenset[str]]:
    """Mining output as attribute-name sets, independent of item ids."""
    return {
        frozenset(str(a) for a in m.attributes(dictionary)) for m in itemsets
    }
