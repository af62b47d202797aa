#!/usr/bin/env python3
"""Drive the CLI through the five-cycle evolving-workload scenario.

Generates the retail star schema and the scenario workloads into a working
directory, then runs init, five recommend cycles, and evaluate, exactly as an
operator would from the shell.  Prints each cycle's summary and finishes with
the evaluation CSV, so the emerge/retain/decline arc of the two planted
mid-life attribute groups is visible end to end.

Usage:
    python3 scripts/run_scenario.py [--workdir DIR] [--budget BYTES] [--keep]
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
from pathlib import Path

from staridx.cli import main as cli
from staridx.schema import dump_schema
from staridx.workloadgen import retail_schema, scenario_workloads


def run(argv: list[str]) -> None:
    print("$ staridx " + " ".join(argv))
    code = cli(argv)
    if code != 0:
        sys.exit(f"command failed with exit code {code}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", help="directory to run in (default: a temp dir)")
    ap.add_argument("--budget", default="256MB", help="storage budget (default 256MB)")
    ap.add_argument("--minsup", default="0.05", help="relative support threshold")
    ap.add_argument(
        "--keep", action="store_true",
        help="keep the working directory instead of deleting a temp dir",
    )
    args = ap.parse_args()

    if args.workdir:
        work = Path(args.workdir)
        work.mkdir(parents=True, exist_ok=True)
        cleanup = False
    else:
        work = Path(tempfile.mkdtemp(prefix="staridx-scenario-"))
        cleanup = not args.keep

    try:
        dump_schema(retail_schema(), str(work / "schema.json"))
        texts = scenario_workloads()
        for i, text in enumerate(texts, start=1):
            (work / f"cycle{i}.sql").write_text(text, encoding="utf-8")

        config = {
            "schema": str(work / "schema.json"),
            "kb": str(work / "kb.json"),
            "state": str(work / "state.json"),
            "out": str(work / "reports"),
            "budget": args.budget,
            "minsup": args.minsup,
            # each cycle replaces the previous batch outright
            "retention_batches": 1,
        }
        config_path = work / "advisor.json"
        config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
        base = ["--config", str(config_path)]

        run(["init", *base])
        for i in range(1, len(texts) + 1):
            run(["recommend", str(work / f"cycle{i}.sql"), *base])
            report = json.loads(
                (work / "reports" / f"report-c{i:04d}.json").read_text()
            )
            print(
                f"  report: emerged={len(report['emerged'])}"
                f" declined={len(report['declined'])}"
                f" create={report['to_create']} drop={report['to_drop']}"
            )
            print()
        run(["evaluate", *base])
        print()
        run(["status", *base])
        print()
        print((work / "reports" / "evaluation.csv").read_text(), end="")
        if not cleanup:
            print(f"\nartifacts kept in {work}")
    finally:
        if cleanup:
            shutil.rmtree(work, ignore_errors=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
