"""Command-line front end.

    staridx init      --schema schema.json --kb kb.json --state state.json
    staridx recommend --schema schema.json --kb kb.json --state state.json \
                      --out reports/ --budget 256MB workload.sql
    staridx evaluate  --state state.json --out reports/
    staridx status    --kb kb.json --state state.json

Options may also come from a JSON config file (--config); explicit flags win.
Exit codes: 0 success (including a no-op cycle), 1 user or input error,
2 internal invariant violation.  One advisory cycle runs at a time per state
file, enforced through a lock file next to it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

from filelock import FileLock, Timeout

from .advisor import (
    AdvisorError,
    CandidateIndex,
    EMPTY_CONFIGURATION,
    IndexConfiguration,
    Recommendation,
    emit_ddl,
    recommendation_to_json,
    run_cycle,
)
from .context import ContextError, DeltaBatch
from .costmodel import CostModelError, CostParameters
from .fileio import atomic_write_text
from .miner import (
    KnowledgeBase,
    KnowledgeBaseError,
    MinerError,
    MiningParameters,
    empty_knowledge_base,
    load_knowledge_base,
    minsup_fraction,
    save_knowledge_base,
)
from .schema import AttrId, SchemaError, StarSchema, load_schema
from .workload import (
    AnalyticalQuery,
    WorkloadBatch,
    load_workload,
    query_from_dict,
    query_to_dict,
    with_id_prefix,
)

log = logging.getLogger(__name__)

CSV_HEADER = (
    "cycle,queries,emerged,declined,retained,candidates,selected,"
    "total_index_bytes,baseline_cost_pages,recommended_cost_pages,"
    "selection_ms,update_ms"
)
CSV_FIELDS = CSV_HEADER.split(",")


class StateError(ValueError):
    """Bad or missing advisor state, config, or command-line input."""


class InternalInvariantError(RuntimeError):
    """A computed result violated an invariant the pipeline guarantees."""


USER_ERRORS = (
    SchemaError,
    ContextError,
    KnowledgeBaseError,
    MinerError,
    CostModelError,
    AdvisorError,
    StateError,
)


_SIZE_RE = re.compile(r"^\s*(\d+)\s*(B|KB|MB|GB)?\s*$", re.IGNORECASE)
_SIZE_FACTOR = {None: 1, "B": 1, "KB": 1024, "MB": 1024**2, "GB": 1024**3}


def parse_byte_size(text) -> int:
    """'500000', '500KB', '64MB', '2GB' -> bytes (powers of 1024)."""
    if isinstance(text, int) and not isinstance(text, bool):
        if text < 0:
            raise StateError(f"budget must be >= 0, got {text}")
        return text
    m = _SIZE_RE.match(str(text))
    if not m:
        raise StateError(f"cannot parse byte size {text!r}")
    unit = m.group(2).upper() if m.group(2) else None
    return int(m.group(1)) * _SIZE_FACTOR[unit]


@dataclass(frozen=True)
class AdvisorConfig:
    schema_path: str | None = None
    kb_path: str | None = None
    state_path: str | None = None
    out_dir: str | None = None
    minsup: Fraction | None = None
    budget: int = 64 * 1024**2
    maintenance_coefficient: Fraction = Fraction(1, 10)
    between_fraction: Fraction = Fraction(1, 10)
    bitmap_limit: int = 2**20
    retention_batches: int | None = None
    report_format: str = "json"

    def __post_init__(self):
        if self.minsup is not None and not 0 < self.minsup <= 1:
            raise StateError(f"minsup must be in (0, 1], got {self.minsup}")
        if self.budget < 0:
            raise StateError("budget must be >= 0")
        if self.retention_batches is not None and self.retention_batches < 1:
            raise StateError("retention_batches must be >= 1")
        if self.report_format not in ("json", "csv"):
            raise StateError(f"unknown report format '{self.report_format}'")

    def cost_parameters(self) -> CostParameters:
        return CostParameters(
            maintenance_coefficient=self.maintenance_coefficient,
            between_fraction=self.between_fraction,
            bitmap_limit=self.bitmap_limit,
        )


_CONFIG_KEYS = {
    "schema": "schema_path",
    "kb": "kb_path",
    "state": "state_path",
    "out": "out_dir",
    "minsup": "minsup",
    "budget": "budget",
    "maintenance_coefficient": "maintenance_coefficient",
    "between_fraction": "between_fraction",
    "bitmap_limit": "bitmap_limit",
    "retention_batches": "retention_batches",
    "report_format": "report_format",
}


def load_config(config_path: str | None, args: argparse.Namespace) -> AdvisorConfig:
    """Config file first, command-line flags on top."""
    values: dict = {}
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise StateError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise StateError(f"malformed config file {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise StateError("config file must hold a JSON object")
        for key, value in doc.items():
            if key not in _CONFIG_KEYS:
                raise StateError(f"unknown key '{key}' in config file")
            values[_CONFIG_KEYS[key]] = value

    for flag, key in (
        ("schema", "schema_path"),
        ("kb", "kb_path"),
        ("state", "state_path"),
        ("out", "out_dir"),
        ("minsup", "minsup"),
        ("budget", "budget"),
        ("report_format", "report_format"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value

    if "minsup" in values and values["minsup"] is not None:
        try:
            values["minsup"] = minsup_fraction(values["minsup"])
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise StateError(f"invalid minsup {values['minsup']!r}: {exc}") from None
    if "budget" in values:
        values["budget"] = parse_byte_size(values["budget"])
    for key in ("maintenance_coefficient", "between_fraction"):
        if key in values:
            values[key] = (
                Fraction(str(values[key]))
                if isinstance(values[key], float)
                else Fraction(values[key])
            )
    return AdvisorConfig(**values)


# -- configuration-state persistence ----------------------------------------


@dataclass(frozen=True)
class AdvisorState:
    """Everything the advisor carries between cycles besides the mining kb:
    the held index configuration, the live query set the cost model needs,
    which cycle ingested which transactions, and the per-cycle history."""

    version: int = 0
    configuration: IndexConfiguration = EMPTY_CONFIGURATION
    queries: tuple[AnalyticalQuery, ...] = ()
    ingested: tuple[tuple[int, tuple[str, ...]], ...] = ()
    history: tuple[dict, ...] = ()
    updated_at: str = ""


def state_to_dict(state: AdvisorState) -> dict:
    return {
        "version": state.version,
        "configuration": [
            {
                "name": c.name,
                "attributes": [[a.table, a.attribute] for a in c.attributes],
                "size_bytes": c.size_bytes,
                "feasible": c.feasible,
            }
            for c in state.configuration.sorted_indexes()
        ],
        "queries": [query_to_dict(q) for q in state.queries],
        "ingested": {str(cycle): list(ids) for cycle, ids in state.ingested},
        "history": list(state.history),
        "updated_at": state.updated_at,
    }


def state_from_dict(doc: dict) -> AdvisorState:
    try:
        indexes = frozenset(
            CandidateIndex(
                attributes=tuple(sorted(AttrId(t, a) for t, a in c["attributes"])),
                size_bytes=c["size_bytes"],
                name=c["name"],
                feasible=c.get("feasible", True),
            )
            for c in doc["configuration"]
        )
        return AdvisorState(
            version=doc["version"],
            configuration=IndexConfiguration(indexes),
            queries=tuple(query_from_dict(q) for q in doc["queries"]),
            ingested=tuple(
                sorted(
                    (int(cycle), tuple(ids))
                    for cycle, ids in doc.get("ingested", {}).items()
                )
            ),
            history=tuple(doc.get("history", [])),
            updated_at=doc.get("updated_at", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StateError(f"malformed state file: {exc!r}") from exc


def save_state(state: AdvisorState, path: str) -> None:
    atomic_write_text(
        path, json.dumps(state_to_dict(state), indent=2, sort_keys=True) + "\n"
    )


def load_state(path: str) -> AdvisorState:
    if not os.path.exists(path):
        raise StateError(f"state file not found: {path} (run init first)")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise StateError(f"malformed state file {path}: {exc}") from exc
    return state_from_dict(doc)


def _require_paths(config: AdvisorConfig, *names: str) -> None:
    missing = [n for n in names if getattr(config, n) is None]
    if missing:
        flags = ", ".join("--" + n.removesuffix("_path").removesuffix("_dir") for n in missing)
        raise StateError(f"missing required option(s): {flags}")


def _lock(state_path: str) -> FileLock:
    return FileLock(state_path + ".lock", timeout=10)


# -- commands ----------------------------------------------------------------


def cmd_init(config: AdvisorConfig, force: bool) -> int:
    _require_paths(config, "schema_path", "kb_path", "state_path")
    load_schema(config.schema_path)  # validate early
    for path in (config.kb_path, config.state_path):
        if os.path.exists(path) and not force:
            raise StateError(f"{path} already exists (use --force to reset)")
    minsup = config.minsup if config.minsup is not None else Fraction(1, 20)
    try:
        with _lock(config.state_path):
            save_knowledge_base(empty_knowledge_base(minsup), config.kb_path)
            save_state(AdvisorState(), config.state_path)
    except Timeout:
        raise StateError("another advisory cycle holds the state lock") from None
    print(f"initialised knowledge base {config.kb_path} (minsup {minsup})")
    print(f"initialised state {config.state_path}")
    return 0


def _expired_ids(
    state: AdvisorState, cycle: int, retention: int | None
) -> frozenset[str]:
    if retention is None:
        return frozenset()
    expired: set[str] = set()
    for ingest_cycle, ids in state.ingested:
        if ingest_cycle <= cycle - retention:
            expired.update(ids)
    return frozenset(expired)


def _read_removed_file(path: str) -> frozenset[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise StateError(f"cannot read removed-ids file: {exc}") from exc
    ids = set()
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            ids.add(line)
    return frozenset(ids)


def _history_row(
    cycle: int, workload: WorkloadBatch, rec: Recommendation
) -> dict:
    return {
        "cycle": cycle,
        "queries": len(workload.queries),
        "emerged": len(rec.outcome.emerged),
        "declined": len(rec.outcome.declined),
        "retained": len(rec.outcome.retained),
        "candidates": len(rec.candidates),
        "selected": len(rec.selected.indexes),
        "total_index_bytes": rec.selected.total_size,
        "baseline_cost_pages": rec.baseline_cost.pages,
        "recommended_cost_pages": rec.recommended_cost.pages,
        "selection_ms": round(rec.timings_ms.get("select_ms", 0.0), 3),
        "update_ms": round(rec.timings_ms.get("mine_ms", 0.0), 3),
    }


def _csv_text(rows: Sequence[dict], with_header: bool) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    if with_header:
        writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _check_invariants(rec: Recommendation, budget: int) -> None:
    if rec.selected.total_size > budget:
        raise InternalInvariantError(
            f"selected configuration exceeds budget: {rec.selected.total_size} > {budget}"
        )
    if rec.recommended_cost.pages > rec.baseline_cost.pages + 1e-9:
        raise InternalInvariantError(
            "recommended cost exceeds the baseline: "
            f"{rec.recommended_cost.pages} > {rec.baseline_cost.pages}"
        )


def cmd_recommend(
    config: AdvisorConfig, workload_path: str, removed_path: str | None
) -> int:
    _require_paths(config, "schema_path", "kb_path", "state_path")
    schema = load_schema(config.schema_path)
    try:
        with _lock(config.state_path):
            kb = load_knowledge_base(config.kb_path)
            state = load_state(config.state_path)
            if config.minsup is not None and config.minsup != kb.parameters.minsup:
                kb = replace(kb, parameters=MiningParameters(config.minsup))

            cycle = kb.version + 1
            raw_batch = load_workload(workload_path, schema)
            batch = with_id_prefix(raw_batch, f"c{cycle:04d}/")

            removed = _expired_ids(state, cycle, config.retention_batches)
            if removed_path:
                removed |= _read_removed_file(removed_path)
            delta = DeltaBatch(added=batch, removed_ids=removed)

            live_queries = tuple(
                q for q in state.queries if q.id not in removed
            ) + batch.queries
            workload = WorkloadBatch(
                live_queries, skipped=batch.skipped, source=workload_path
            )

            rec, new_kb, next_config = run_cycle(
                kb,
                delta,
                state.configuration,
                workload,
                schema,
                config.cost_parameters(),
                config.budget,
            )
            _check_invariants(rec, config.budget)

            live_ids = {t.id for t in new_kb.database.transactions}
            ingested = tuple(
                (c, tuple(i for i in ids if i in live_ids))
                for c, ids in state.ingested
            )
            ingested = tuple((c, ids) for c, ids in ingested if ids)
            if batch.queries:
                ingested += ((cycle, tuple(q.id for q in batch.queries)),)

            new_state = AdvisorState(
                version=new_kb.version,
                configuration=next_config,
                queries=live_queries,
                ingested=ingested,
                history=state.history + (_history_row(cycle, workload, rec),),
                updated_at=new_kb.updated_at,
            )
            save_knowledge_base(new_kb, config.kb_path)
            save_state(new_state, config.state_path)
    except Timeout:
        raise StateError("another advisory cycle holds the state lock") from None

    out_dir = config.out_dir or os.path.dirname(os.path.abspath(config.state_path))
    os.makedirs(out_dir, exist_ok=True)
    ddl_path = os.path.join(out_dir, f"update-c{cycle:04d}.sql")
    atomic_write_text(ddl_path, emit_ddl(rec.diff, schema))
    if config.report_format == "csv":
        report_path = os.path.join(out_dir, f"report-c{cycle:04d}.csv")
        atomic_write_text(
            report_path, _csv_text([_history_row(cycle, workload, rec)], True)
        )
    else:
        report_path = os.path.join(out_dir, f"report-c{cycle:04d}.json")
        atomic_write_text(
            report_path, recommendation_to_json(rec, new_kb.dictionary, cycle)
        )

    o = rec.outcome
    print(f"cycle {cycle}: {len(batch.queries)} queries in, {batch.skipped} skipped")
    print(
        f"  itemsets: {len(o.emerged)} emerged, {len(o.retained)} retained,"
        f" {len(o.declined)} declined"
    )
    print(
        f"  candidates: {len(rec.candidates)}; selected {len(rec.selected.indexes)}"
        f" ({rec.selected.total_size} bytes of {config.budget} budget)"
    )
    print(
        f"  workload cost: {rec.baseline_cost.pages:.1f} pages unindexed ->"
        f" {rec.recommended_cost.pages:.1f} recommended"
    )
    create = sorted(c.name for c in rec.diff.to_create)
    drop = sorted(c.name for c in rec.diff.to_drop)
    print(f"  create: {', '.join(create) if create else '(none)'}")
    print(f"  drop:   {', '.join(drop) if drop else '(none)'}")
    if rec.dropped_beneficial:
        print(
            "  note: dropped despite remaining benefit: "
            + ", ".join(rec.dropped_beneficial)
        )
    print(f"  report: {report_path}")
    print(f"  ddl:    {ddl_path}")
    return 0


def cmd_evaluate(config: AdvisorConfig) -> int:
    _require_paths(config, "state_path")
    state = load_state(config.state_path)
    if not state.history:
        raise StateError("no advisory cycles recorded yet")
    out_dir = config.out_dir or os.path.dirname(os.path.abspath(config.state_path))
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "evaluation.csv")

    last_written = 0
    existing = ""
    if os.path.exists(csv_path):
        with open(csv_path, "r", encoding="utf-8") as fh:
            existing = fh.read()
        for line in existing.splitlines()[1:]:
            if line.strip():
                last_written = max(last_written, int(line.split(",", 1)[0]))

    fresh = [row for row in state.history if row["cycle"] > last_written]
    if not existing:
        text = _csv_text(fresh, with_header=True)
    else:
        text = existing + _csv_text(fresh, with_header=False)
    atomic_write_text(csv_path, text)
    print(f"wrote {len(fresh)} row(s) to {csv_path}")
    return 0


def cmd_status(config: AdvisorConfig) -> int:
    _require_paths(config, "kb_path", "state_path")
    kb = load_knowledge_base(config.kb_path)
    state = load_state(config.state_path)
    print(f"knowledge base version {kb.version} (updated {kb.updated_at})")
    print(
        f"  transactions: {len(kb.database.transactions)}"
        f" (total weight {kb.transaction_weight})"
    )
    print(f"  dictionary: {len(kb.dictionary)} attributes")
    print(f"  maximal frequent itemsets: {len(kb.maximal)} (minsup {kb.parameters.minsup})")
    names = ", ".join(c.name for c in state.configuration.sorted_indexes()) or "(none)"
    print(
        f"  configuration: {len(state.configuration.indexes)} index(es),"
        f" {state.configuration.total_size} bytes of {config.budget} budget"
    )
    print(f"    {names}")
    return 0


# -- entry point --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for internal invariant
    # violations here, so downgrade flag mistakes to the user-error code.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="staridx",
        description="workload-driven bitmap join index advisor for star schemas",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, out: bool = False):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--schema", help="star schema JSON file")
        p.add_argument("--kb", help="knowledge base JSON file")
        p.add_argument("--state", help="advisor state JSON file")
        p.add_argument("--minsup", help="minimum support, e.g. 0.05 or 1/20")
        p.add_argument("--budget", help="storage budget, e.g. 500000, 64MB, 2GB")
        if out:
            p.add_argument("--out", help="output directory for reports and DDL")
            p.add_argument(
                "--report-format",
                dest="report_format",
                choices=("json", "csv"),
                help="cycle report format (default json)",
            )

    p_init = sub.add_parser("init", help="create an empty knowledge base and state")
    common(p_init)
    p_init.add_argument("--force", action="store_true", help="reset existing files")

    p_rec = sub.add_parser("recommend", help="run one advisory cycle on a workload")
    common(p_rec, out=True)
    p_rec.add_argument("workload", help="SQL workload file, statements ';'-terminated")
    p_rec.add_argument(
        "--removed",
        help="file with transaction ids to retire, one per line",
    )

    p_eval = sub.add_parser("evaluate", help="append per-cycle metrics to evaluation.csv")
    common(p_eval, out=True)

    p_status = sub.add_parser("status", help="print knowledge base and configuration summary")
    common(p_status)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args)
        if args.command == "init":
            return cmd_init(config, args.force)
        if args.command == "recommend":
            return cmd_recommend(config, args.workload, args.removed)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        if args.command == "status":
            return cmd_status(config)
        parser.error(f"unknown command {args.command}")
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InternalInvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
