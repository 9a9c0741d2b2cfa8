"""Command-line front end: ``codedmem run|sweep|table|check|list``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, TraceIntegrityError


def _print_json(obj):
    print(json.dumps(obj, sort_keys=True, indent=2))


def cmd_run(args) -> int:
    report, _ = harness.run_scenario(args.config, args.out, args.seed)
    _print_json({
        "scenario": report["scenario"],
        "verdict": report["verdict"],
        "atomic": report["atomicity"]["atomic"],
        "liveness": report["liveness"]["status"],
        "write_cost": report["ledger"]["write_cost"],
        "read_cost": report["ledger"]["read_cost"],
        "storage_sup": report["ledger"]["storage_sup"],
        "expect_failures": report["expect"]["failures"],
        "ok": report["ok"],
    })
    return 0 if report["ok"] else 1


def cmd_sweep(args) -> int:
    seeds = harness.parse_seed_range(args.seeds)
    summary = harness.sweep(args.config, seeds, jobs=args.jobs, randomize=args.random_workload)
    if args.out:
        Path(args.out).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    _print_json(summary)
    return 0 if summary["ok"] else 1


def cmd_table(args) -> int:
    text = harness.cost_table(args.grid)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_check(args) -> int:
    report = harness.check_trace(args.trace)
    _print_json(report)
    return 0 if report["ok"] else 1


def cmd_list(args) -> int:
    for name in harness.bundled_scenarios():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codedmem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario and write its trace and report")
    p.add_argument("config", help="scenario JSON path or bundled scenario name")
    p.add_argument("--out", default=None, help="directory for <id>.trace.jsonl and <id>.report.json")
    p.add_argument("--seed", type=int, default=None, help="override the scheduler seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario across a seed range")
    p.add_argument("config")
    p.add_argument("--seeds", required=True, help="inclusive range A..B")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--random-workload", action="store_true",
                   help="draw a fresh random workload per seed instead of reusing the template's ops")
    p.add_argument("--out", default=None, help="write the aggregate JSON here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table", help="emit the cost table as CSV")
    p.add_argument("--grid", required=True, help="'n=3,5,7;f=1,2', a JSON file, or a bundled grid name")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("check", help="re-run the checkers on an existing trace")
    p.add_argument("trace")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceIntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
