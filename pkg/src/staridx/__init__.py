"""Workload-driven bitmap join index advisor for star-schema warehouses.

The pipeline: parse an analytical SQL workload against a star schema, turn
each query's grouping and restriction attributes into a weighted transaction,
mine the maximal frequent attribute sets incrementally as the workload
drifts, classify them as emerged / retained / declined, and pick the bitmap
join index configuration that minimises estimated workload cost under a
storage budget.  The difference between the held configuration and the new
one comes out as CREATE/DROP DDL.
"""

from .schema import (
    AttrId,
    AttributeStats,
    SchemaError,
    StarSchema,
    TableStats,
    load_schema,
    load_schema_dict,
    dump_schema,
)
from .workload import (
    AnalyticalQuery,
    QueryParseError,
    ResolutionError,
    RestrictionPredicate,
    UnsupportedConstructError,
    WorkloadBatch,
    extract_indexable,
    load_workload,
    parse_query,
    parse_workload,
    with_id_prefix,
)
from .context import (
    ContextError,
    DeltaBatch,
    ItemDictionary,
    Transaction,
    TransactionDatabase,
    apply_delta,
    build_context,
    support,
)
from .miner import (
    Itemset,
    KnowledgeBase,
    KnowledgeBaseError,
    MinerError,
    MiningOutcome,
    MiningParameters,
    brute_force_maximal,
    classify,
    empty_knowledge_base,
    load_knowledge_base,
    mine_incremental,
    mine_maximal,
    save_knowledge_base,
)
from .costmodel import (
    CostEstimate,
    CostModelError,
    CostParameters,
    DEFAULT_COST_PARAMETERS,
    InfeasibleIndexError,
    IndexNotUsableError,
    bitmap_count,
    cardenas_pages,
    index_size,
    maintenance_cost,
    query_best_cost,
    query_cost_indexed,
    query_cost_unindexed,
    workload_cost,
)
from .advisor import (
    AdvisorError,
    CandidateIndex,
    ConfigurationDiff,
    EMPTY_CONFIGURATION,
    IndexConfiguration,
    Recommendation,
    diff_configurations,
    emit_ddl,
    generate_candidates,
    index_name,
    make_candidate,
    recommendation_to_dict,
    run_cycle,
    select_configuration,
    select_configuration_traced,
)

__version__ = "0.1.0"

__all__ = [
    "AttrId",
    "AttributeStats",
    "SchemaError",
    "StarSchema",
    "TableStats",
    "load_schema",
    "load_schema_dict",
    "dump_schema",
    "AnalyticalQuery",
    "QueryParseError",
    "ResolutionError",
    "RestrictionPredicate",
    "UnsupportedConstructError",
    "WorkloadBatch",
    "extract_indexable",
    "load_workload",
    "parse_query",
    "parse_workload",
    "with_id_prefix",
    "ContextError",
    "DeltaBatch",
    "ItemDictionary",
    "Transaction",
    "TransactionDatabase",
    "apply_delta",
    "build_context",
    "support",
    "Itemset",
    "KnowledgeBase",
    "KnowledgeBaseError",
    "MinerError",
    "MiningOutcome",
    "MiningParameters",
    "brute_force_maximal",
    "classify",
    "empty_knowledge_base",
    "load_knowledge_base",
    "mine_incremental",
    "mine_maximal",
    "save_knowledge_base",
    "CostEstimate",
    "CostModelError",
    "CostParameters",
    "DEFAULT_COST_PARAMETERS",
    "InfeasibleIndexError",
    "IndexNotUsableError",
    "bitmap_count",
    "cardenas_pages",
    "index_size",
    "maintenance_cost",
    "query_best_cost",
    "query_cost_indexed",
    "query_cost_unindexed",
    "workload_cost",
    "AdvisorError",
    "CandidateIndex",
    "ConfigurationDiff",
    "EMPTY_CONFIGURATION",
    "IndexConfiguration",
    "Recommendation",
    "diff_configurations",
    "emit_ddl",
    "generate_candidates",
    "index_name",
    "make_candidate",
    "recommendation_to_dict",
    "run_cycle",
    "select_configuration",
    "select_configuration_traced",
    "__version__",
]
