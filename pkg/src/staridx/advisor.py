"""Index selection: turn mining outcomes into a budgeted index configuration
and a create/drop script.

Candidates are the currently held index itemsets plus the newly emerged
maximal itemsets, minus everything that declined; declined itemsets are
removed before selection even when they still look beneficial, and any such
drop is flagged on the recommendation.  Selection is greedy: repeatedly take
the feasible candidate with the largest strict improvement of the workload
cost that still fits the byte budget, breaking ties toward the smaller index
and then the lexicographically first attribute list.  Existing indexes get no
seniority; they compete like any other candidate.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .context import DeltaBatch, ItemDictionary
from .costmodel import (
    CostEstimate,
    CostParameters,
    DEFAULT_COST_PARAMETERS,
    bitmap_count,
    workload_cost,
)
from .miner import (
    Itemset,
    KnowledgeBase,
    MiningOutcome,
    classify,
    mine_incremental,
)
from .schema import AttrId, StarSchema
from .workload import WorkloadBatch


class AdvisorError(ValueError):
    pass


_NAME_LIMIT = 30
_SANITIZE_RE = re.compile(r"[^A-Za-z0-9_]")


def index_name(itemset: Iterable[AttrId], schema: StarSchema) -> str:
    """Deterministic DDL identifier for an index over the itemset.

    bji_<fact>_<table>_<attr>... over the sorted attributes; names longer than
    30 characters are truncated and carry an 8-hex content hash so distinct
    itemsets cannot collide after truncation.
    """
    attrs = sorted(frozenset(itemset))
    if not attrs:
        raise AdvisorError("cannot name an index over no attributes")
    parts = [_SANITIZE_RE.sub("", f"{t}_{a}") for t, a in attrs]
    base = _SANITIZE_RE.sub("", f"bji_{schema.fact.name}_") + "_".join(parts)
    if len(base) <= _NAME_LIMIT:
        return base
    digest = hashlib.sha256("|".join(map(str, attrs)).encode("utf-8")).hexdigest()[:8]
    return base[: _NAME_LIMIT - 9] + "_" + digest


@dataclass(frozen=True)
class CandidateIndex:
    attributes: tuple[AttrId, ...]
    size_bytes: int
    name: str
    feasible: bool = True

    def __post_init__(self):
        if not self.attributes:
            raise AdvisorError("a candidate index needs at least one attribute")
        if list(self.attributes) != sorted(set(self.attributes)):
            raise AdvisorError("candidate attributes must be sorted and distinct")

    @property
    def itemset(self) -> frozenset[AttrId]:
        return frozenset(self.attributes)


def make_candidate(
    itemset: Iterable[AttrId],
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
) -> CandidateIndex:
    attrs = tuple(sorted(frozenset(itemset)))
    combos = bitmap_count(attrs, schema)
    feasible = combos <= parameters.bitmap_limit
    size = combos * -(-schema.fact.row_count // 8)
    return CandidateIndex(attrs, size, index_name(attrs, schema), feasible)


@dataclass(frozen=True)
class IndexConfiguration:
    indexes: frozenset[CandidateIndex] = frozenset()

    def __post_init__(self):
        itemsets = [c.itemset for c in self.indexes]
        if len(set(itemsets)) != len(itemsets):
            raise AdvisorError("configuration has two indexes over one itemset")

    @property
    def total_size(self) -> int:
        return sum(c.size_bytes for c in self.indexes)

    def itemsets(self) -> frozenset[frozenset[AttrId]]:
        return frozenset(c.itemset for c in self.indexes)

    def sorted_indexes(self) -> list[CandidateIndex]:
        return sorted(self.indexes, key=lambda c: c.name)


EMPTY_CONFIGURATION = IndexConfiguration()


@dataclass(frozen=True)
class ConfigurationDiff:
    to_create: frozenset[CandidateIndex] = frozenset()
    to_drop: frozenset[CandidateIndex] = frozenset()


def generate_candidates(
    outcome: MiningOutcome,
    current: IndexConfiguration,
    schema: StarSchema,
    dictionary: ItemDictionary,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
) -> frozenset[CandidateIndex]:
    """Candidate itemsets: (current u emerged) - declined, sized and named.

    Singleton itemsets are kept; infeasible candidates are flagged rather than
    silently dropped so reports can show them.
    """
    declined = {m.attributes(dictionary) for m in outcome.declined}
    itemsets = {c.itemset for c in current.indexes}
    itemsets |= {m.attributes(dictionary) for m in outcome.emerged}
    itemsets -= declined
    return frozenset(make_candidate(s, schema, parameters) for s in itemsets)


@dataclass(frozen=True)
class SelectionStep:
    """One greedy acceptance, for traceability: costs before and after."""

    candidate: CandidateIndex
    cost_before: float
    cost_after: float


def select_configuration(
    candidates: Iterable[CandidateIndex],
    batch: WorkloadBatch,
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
    budget: int = 0,
) -> IndexConfiguration:
    configuration, _trace = select_configuration_traced(
        candidates, batch, schema, parameters, budget
    )
    return configuration


def select_configuration_traced(
    candidates: Iterable[CandidateIndex],
    batch: WorkloadBatch,
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
    budget: int = 0,
) -> tuple[IndexConfiguration, list[SelectionStep]]:
    """Greedy selection under the byte budget.

    Each round evaluates workload_cost with every remaining feasible candidate
    added to the chosen set and accepts the best strict improvement; stops
    when no candidate improves the cost or fits the budget.  The traced
    variant returns the acceptance sequence for auditing.
    """
    if budget < 0:
        raise AdvisorError(f"budget must be >= 0, got {budget}")
    pool = sorted(
        (c for c in candidates if c.feasible),
        key=lambda c: (c.size_bytes, c.attributes),
    )
    chosen: list[CandidateIndex] = []
    chosen_sets: list[frozenset[AttrId]] = []
    used = 0
    trace: list[SelectionStep] = []
    current_cost = workload_cost(batch, chosen_sets, schema, parameters).pages

    while pool:
        best = None
        best_key = None
        best_cost = None
        for c in pool:
            if used + c.size_bytes > budget:
                continue
            cost = workload_cost(
                batch, chosen_sets + [c.itemset], schema, parameters
            ).pages
            improvement = current_cost - cost
            key = (-improvement, c.size_bytes, c.attributes)
            if best_key is None or key < best_key:
                best, best_key, best_cost = c, key, cost
        if best is None or not best_cost < current_cost:
            break
        trace.append(SelectionStep(best, current_cost, best_cost))
        chosen.append(best)
        chosen_sets.append(best.itemset)
        used += best.size_bytes
        current_cost = best_cost
        pool.remove(best)

    return IndexConfiguration(frozenset(chosen)), trace


def diff_configurations(
    current: IndexConfiguration, target: IndexConfiguration
) -> ConfigurationDiff:
    """Create/drop sets keyed by itemset identity."""
    current_sets = current.itemsets()
    target_sets = target.itemsets()
    return ConfigurationDiff(
        to_create=frozenset(
            c for c in target.indexes if c.itemset not in current_sets
        ),
        to_drop=frozenset(
            c for c in current.indexes if c.itemset not in target_sets
        ),
    )


def emit_ddl(diff: ConfigurationDiff, schema: StarSchema) -> str:
    """Byte-stable DDL: drops then creates, each name-sorted.

    An empty diff yields an empty script.
    """
    lines = []
    for index in sorted(diff.to_drop, key=lambda c: c.name):
        lines.append(f"DROP INDEX {index.name};")
    fact = schema.fact.name
    for index in sorted(diff.to_create, key=lambda c: c.name):
        attrs = ", ".join(str(a) for a in index.attributes)
        dims = sorted({a.table for a in index.attributes})
        joins = []
        for dim in dims:
            fk, pk = schema.join_key_for_dimension(dim)
            joins.append(f"{fact}.{fk} = {dim}.{pk}")
        lines.append(
            f"CREATE BITMAP INDEX {index.name} ON {fact}({attrs})"
            f" FROM {', '.join([fact] + dims)}"
            f" WHERE {' AND '.join(joins)};"
        )
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class Recommendation:
    outcome: MiningOutcome
    candidates: frozenset[CandidateIndex]
    selected: IndexConfiguration
    diff: ConfigurationDiff
    baseline_cost: CostEstimate
    recommended_cost: CostEstimate
    dropped_beneficial: tuple[str, ...] = ()
    timings_ms: Mapping[str, float] = field(default_factory=dict, compare=False)


def _itemset_entry(m: Itemset, dictionary: ItemDictionary) -> dict:
    return {
        "attributes": sorted(str(a) for a in m.attributes(dictionary)),
        "support": m.support,
    }


def _index_entry(c: CandidateIndex) -> dict:
    return {
        "name": c.name,
        "attributes": [str(a) for a in c.attributes],
        "size_bytes": c.size_bytes,
        "feasible": c.feasible,
    }


def recommendation_to_dict(
    rec: Recommendation, dictionary: ItemDictionary, cycle: int | None = None
) -> dict:
    """JSON-able report.  Identical inputs yield identical output apart from
    the timings, which are measurements, not decisions."""
    doc = {
        "emerged": [
            _itemset_entry(m, dictionary)
            for m in sorted(rec.outcome.emerged, key=lambda m: m.items)
        ],
        "declined": [
            _itemset_entry(m, dictionary)
            for m in sorted(rec.outcome.declined, key=lambda m: m.items)
        ],
        "retained": [
            _itemset_entry(m, dictionary)
            for m in sorted(rec.outcome.retained, key=lambda m: m.items)
        ],
        "candidates": [_index_entry(c) for c in sorted(rec.candidates, key=lambda c: c.name)],
        "selected": {
            "indexes": [_index_entry(c) for c in rec.selected.sorted_indexes()],
            "total_size_bytes": rec.selected.total_size,
        },
        "to_create": [_index_entry(c) for c in sorted(rec.diff.to_create, key=lambda c: c.name)],
        "to_drop": [_index_entry(c) for c in sorted(rec.diff.to_drop, key=lambda c: c.name)],
        "dropped_beneficial": sorted(rec.dropped_beneficial),
        "baseline_cost_pages": rec.baseline_cost.pages,
        "recommended_cost_pages": rec.recommended_cost.pages,
        "timings_ms": dict(rec.timings_ms),
    }
    if cycle is not None:
        doc["cycle"] = cycle
    return doc


def recommendation_to_json(
    rec: Recommendation, dictionary: ItemDictionary, cycle: int | None = None
) -> str:
    return json.dumps(
        recommendation_to_dict(rec, dictionary, cycle), indent=2, sort_keys=True
    ) + "\n"


def run_cycle(
    kb: KnowledgeBase,
    delta: DeltaBatch,
    current: IndexConfiguration,
    workload: WorkloadBatch,
    schema: StarSchema,
    parameters: CostParameters = DEFAULT_COST_PARAMETERS,
    budget: int = 0,
) -> tuple[Recommendation, KnowledgeBase, IndexConfiguration]:
    """One advisory cycle: delta in, recommendation and updated state out.

    workload is the accumulated live query set after the delta (the delta's
    additions plus every retained earlier query); the knowledge base keeps
    only attribute sets, which carry no join or predicate structure, so cost
    evaluation needs the queries themselves.
    """
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    t = time.perf_counter()
    _, new_kb = mine_incremental(kb, delta)
    timings["mine_ms"] = (time.perf_counter() - t) * 1000.0

    t = time.perf_counter()
    current_itemsets = frozenset(
        Itemset(tuple(sorted(new_kb.dictionary.id_of(a) for a in c.itemset)))
        for c in current.indexes
    )
    outcome = classify(kb.maximal, new_kb.maximal, current_itemsets)
    timings["classify_ms"] = (time.perf_counter() - t) * 1000.0

    t = time.perf_counter()
    candidates = generate_candidates(
        outcome, current, schema, new_kb.dictionary, parameters
    )
    timings["candidates_ms"] = (time.perf_counter() - t) * 1000.0

    t = time.perf_counter()
    selected = select_configuration(
        candidates, workload, schema, parameters, budget
    )
    timings["select_ms"] = (time.perf_counter() - t) * 1000.0

    t = time.perf_counter()
    diff = diff_configurations(current, selected)
    timings["diff_ms"] = (time.perf_counter() - t) * 1000.0

    baseline = workload_cost(workload, [], schema, parameters)
    recommended = workload_cost(
        workload, sorted(selected.itemsets(), key=sorted), schema, parameters
    )

    dropped_beneficial = []
    selected_sets = sorted(selected.itemsets(), key=sorted)
    for dropped in sorted(diff.to_drop, key=lambda c: c.name):
        if not dropped.feasible:
            continue
        with_dropped = workload_cost(
            workload, selected_sets + [dropped.itemset], schema, parameters
        )
        if with_dropped.pages < recommended.pages:
            dropped_beneficial.append(dropped.name)

    timings["total_ms"] = (time.perf_counter() - t_total) * 1000.0

    rec = Recommendation(
        outcome=outcome,
        candidates=candidates,
        selected=selected,
        diff=diff,
        baseline_cost=baseline,
        recommended_cost=recommended,
        dropped_beneficial=tuple(dropped_beneficial),
        timings_ms=timings,
    )
    return rec, new_kb, selected
