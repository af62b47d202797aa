#!/usr/bin/env python3
"""Benchmark maximal-set mining on a dense synthetic context.

Builds a planted-pattern transaction context, mines it from scratch, then
appends a block of rows and times an incremental update against a cold
rebuild over the same final data.  Both runs must find identical maximal
sets; the point of keeping per-item coverage masks in the knowledge base is
that the incremental path wins.

Usage:
    python3 scripts/bench_mining.py [--transactions N] [--items N]
                                    [--delta N] [--minsup F] [--repeat N]
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from staridx.context import DeltaBatch, TransactionDatabase
from staridx.miner import KnowledgeBase, MiningParameters, mine_incremental, mine_maximal
from staridx.workload import WorkloadBatch
from staridx.workloadgen import DenseContextSpec, dense_context, dense_context_rows, rows_as_queries


def timed(fn, repeat: int):
    best, out = None, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        elapsed = time.perf_counter() - t
        best = elapsed if best is None else min(best, elapsed)
    return best, out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--transactions", type=int, default=10_000)
    ap.add_argument("--items", type=int, default=64)
    ap.add_argument("--delta", type=int, default=500, help="rows appended before the update")
    ap.add_argument("--minsup", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=3, help="take the best of N runs")
    args = ap.parse_args()

    spec = replace(DenseContextSpec(), transactions=args.transactions, items=args.items)
    params = MiningParameters(args.minsup)

    t = time.perf_counter()
    db = dense_context(spec)
    build = time.perf_counter() - t
    print(f"context: {args.transactions} transactions x {args.items} items "
          f"(built in {build:.2f}s)")

    base_time, maximal = timed(lambda: mine_maximal(db, params), args.repeat)
    print(f"base mine:        {base_time * 1000:8.1f} ms  "
          f"({len(maximal)} maximal sets at minsup {args.minsup})")

    kb = KnowledgeBase(params, db, maximal, version=1)
    rows = dense_context_rows(spec, spec.transactions, args.delta)
    delta = DeltaBatch(added=WorkloadBatch(rows_as_queries(rows, db.dictionary), source="bench"))

    inc_time, (_, kb2) = timed(lambda: mine_incremental(kb, delta), args.repeat)
    print(f"incremental mine: {inc_time * 1000:8.1f} ms  (+{args.delta} rows)")

    def cold():
        rebuilt = TransactionDatabase(
            kb2.database.dictionary, kb2.database.transactions, kb2.database.total_weight
        )
        return mine_maximal(rebuilt, params)

    cold_time, cold_maximal = timed(cold, args.repeat)
    print(f"cold rebuild:     {cold_time * 1000:8.1f} ms  (same final rows)")

    same = {m.items: m.support for m in kb2.maximal} == {
        m.items: m.support for m in cold_maximal
    }
    print(f"results identical: {same};  speedup {cold_time / inc_time:.2f}x")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
