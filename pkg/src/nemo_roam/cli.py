"""``nemo-roam`` command line: run, validate and list scenarios.

Exit codes: 0 on success, 2 for parse/validation problems, 3 when the
simulation itself fails (event storm, misconfigured protocol state).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import List, Optional

from .metrics import FlowMetrics, MetricsReport, format_trace
from .scenario import (
    ParseError,
    ScenarioSpec,
    ValidationError,
    canned_names,
    canned_text,
    parse_scenario,
)
from .simnet import DEFAULT_MAX_EVENTS, EventStorm
from .simulation import run_scenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3

FLOW_COLUMNS = [f.name for f in fields(FlowMetrics)]


def emit_report(report: MetricsReport, format: str = "table") -> str:
    if format == "json":
        return json.dumps(asdict(report), indent=2, sort_keys=False) + "\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FLOW_COLUMNS)
        for flow in report.flows:
            writer.writerow([getattr(flow, c) for c in FLOW_COLUMNS])
        return buf.getvalue()
    if format == "table":
        return _table(report)
    raise ValueError(f"unknown report format {format!r}")


def _table(report: MetricsReport) -> str:
    rows = [FLOW_COLUMNS] + [[str(getattr(f, c)) for c in FLOW_COLUMNS] for f in report.flows]
    widths = [max(len(r[i]) for r in rows) for i in range(len(FLOW_COLUMNS))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    drops = ", ".join(f"{k}={v}" for k, v in report.drops_by_reason.items()) or "none"
    lines += [
        "",
        f"ha_traversal_share          {report.ha_traversal_share}",
        f"signaling_msgs_per_handoff  {report.signaling_msgs_per_handoff}",
        f"drops_by_reason             {drops}",
    ]
    return "\n".join(lines) + "\n"


def load_scenario(ref: str) -> ScenarioSpec:
    """Read a scenario from a file path, falling back to a shipped scenario name."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path.read_text())
    if ref in canned_names():
        return parse_scenario(canned_text(ref))
    raise FileNotFoundError(f"no scenario file or shipped scenario named {ref!r}")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nemo-roam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and print its metrics report")
    run.add_argument("scenario", help="scenario file, or the name of a shipped scenario")
    run.add_argument("--mode", choices=("bs", "ro"), help="override the scenario's mode")
    run.add_argument("--trace", type=Path, help="write the per-hop trace to this file")
    run.add_argument("--report", choices=("table", "json", "csv"), default="table")
    run.add_argument("--t-end", type=int, dest="t_end", help="override the end time in ms")
    run.add_argument("--max-events", type=int, default=DEFAULT_MAX_EVENTS,
                     help="abort with an event storm after this many events")

    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("scenario")

    sub.add_parser("list-scenarios", help="list the shipped scenarios")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-scenarios":
        for name in canned_names():
            print(name)
        return EXIT_OK

    try:
        spec = load_scenario(args.scenario)
        if args.command == "run":
            if args.mode:
                spec = spec.with_mode(args.mode)
            if args.t_end is not None:
                if args.t_end < 0:
                    raise ValidationError("--t-end must be non-negative")
                spec = replace(spec, t_end_ms=args.t_end)
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"nemo-roam: {exc}", file=sys.stderr)
        return EXIT_INPUT

    if args.command == "validate":
        print(f"{args.scenario}: ok ({len(spec.nodes)} nodes, {len(spec.links)} links)")
        return EXIT_OK

    try:
        records, report = run_scenario(spec, args.max_events)
    except EventStorm as exc:
        print(f"nemo-roam: event storm: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # protocol or topology misconfiguration surfaced at runtime
        print(f"nemo-roam: simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.trace is not None:
        args.trace.write_text(format_trace(records))
    sys.stdout.write(emit_report(report, args.report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
