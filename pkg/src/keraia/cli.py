"""Command line: validate documents, run reasoning, query slots, play games.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, List, Optional

from .errors import KeraiaError, KsynthSyntaxError
from .events import ResponderRegistry
from .ksynth import load_file, parse_file
from .lot import chain_lots
from .model import KnowledgeBase, canonical
from .packs import PACK_NAMES, load_pack, pack_path
from .paths import resolve_kline
from .rules import forward_chain
from .trace import ReasoningTrace
from .xai import WhatIfReport, narrative, narrative_from_records, what_if


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keraia",
        description="Frame-based symbolic reasoning over knowledge packs.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser(
        "check", help="parse and cross-reference textual documents")
    check.add_argument("files", nargs="+", help="document paths")

    run = sub.add_parser("run", help="run lines of thought or a rule set")
    _add_source_flags(run)
    run.add_argument("--lot", action="append", default=[],
                     help="line of thought to run (repeatable, in order)")
    run.add_argument("--rules", help="rule set to forward-chain instead")
    run.add_argument("--seed", type=int, default=0,
                     help="root seed for any randomness (default 0)")
    run.add_argument("--max-ticks", type=int, default=None,
                     help="abort once this many clock ticks are spent")
    run.add_argument("--out", help="write the trace here instead of stdout")
    run.add_argument("--format", choices=("text", "structured"),
                     default="structured", help="trace rendering")
    run.add_argument("--what-if", action="append", default=[],
                     metavar="PATH=VALUE",
                     help="compare against a run with this slot changed")

    query = sub.add_parser("query", help="print the value a path points at")
    _add_source_flags(query)
    query.add_argument("path", help="slash-separated path to a slot")
    query.add_argument("--dimension",
                       help="apply this dimension's assumptions first")

    risk = sub.add_parser("risk", help="play seeded territory-conquest games")
    risk.add_argument("--bots", required=True,
                      help="comma-separated bot kinds, one per seat")
    risk.add_argument("--games", type=int, default=1,
                      help="number of games (default 1)")
    risk.add_argument("--seed", type=int, default=0,
                      help="base seed; game i uses seed+i (default 0)")
    risk.add_argument("--max-turns", type=int, default=30,
                      help="turn cap per game (default 30)")
    risk.add_argument("--out", default="results.csv",
                      help="results CSV path; the per-turn series and the "
                           "figure land next to it")

    trace = sub.add_parser("trace", help="work with exported traces")
    trace_sub = trace.add_subparsers(dest="trace_command", required=True)
    export = trace_sub.add_parser(
        "export", help="re-render a stored structured trace")
    export.add_argument("--input", required=True,
                        help="line-delimited trace records")
    export.add_argument("--format", choices=("text", "structured"),
                        default="text", help="output rendering")
    export.add_argument("--out", help="write here instead of stdout")
    return parser


def _add_source_flags(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--pack", choices=PACK_NAMES,
                       help="bundled scenario pack")
    group.add_argument("--files", nargs="+", help="document paths to load")


def _load_inputs(args) -> tuple[KnowledgeBase, ResponderRegistry]:
    if args.pack:
        return load_pack(args.pack)
    kb = KnowledgeBase()
    for path in args.files:
        load_file(path, kb=kb)
    return kb, ResponderRegistry(with_builtins=True)


def _parse_modification(text: str) -> tuple[str, Any]:
    path, sep, raw = text.partition("=")
    if not sep or not path:
        raise UsageError(f"what-if takes PATH=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def _emit(payload: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as handle:
            handle.write(payload)
    else:
        sys.stdout.write(payload)


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _whatif_structured(report: WhatIfReport) -> str:
    lines = [_dump({
        "kind": "WhatIfSummary", "tick": 0, "at": "",
        "modifications": [[p, canonical(v)]
                          for p, v in report.modifications],
        "diverged": report.diverged,
        "divergence_index": report.divergence_index,
        # outcome entries carry values as canonical JSON text, or "absent"
        "outcome_diff": [list(entry) for entry in report.outcome_diff],
    })]
    for stream, trace in (("baseline", report.baseline_trace),
                          ("variant", report.variant_trace)):
        for rec in trace.records():
            rec["stream"] = stream
            lines.append(_dump(rec))
    return "\n".join(lines) + "\n"


def _whatif_text(report: WhatIfReport) -> str:
    lines = []
    for path, value in report.modifications:
        lines.append(f"what-if: {path} = {value!r}")
    if report.diverged:
        lines.append(f"diverged at event {report.divergence_index}")
    else:
        lines.append("no divergence")
    for path, base, variant in report.outcome_diff:
        lines.append(f"outcome: {path}: {base} -> {variant}")
    lines.append("--- baseline ---")
    lines.append(narrative(report.baseline_trace).rstrip("\n"))
    lines.append("--- variant ---")
    lines.append(narrative(report.variant_trace).rstrip("\n"))
    return "\n".join(lines) + "\n"


def cmd_check(args) -> int:
    diagnostics = []
    for path in args.files:
        try:
            load_file(path)
        except KsynthSyntaxError as exc:
            diagnostics.append(f"{path}:{exc.line}:{exc.column}: {exc}")
        except (KeraiaError, OSError) as exc:
            diagnostics.append(f"{path}: {type(exc).__name__}: {exc}")
    for line in diagnostics:
        print(line, file=sys.stderr)
    if diagnostics:
        return 1
    print(f"ok: {len(args.files)} file(s)")
    return 0


def cmd_run(args) -> int:
    if bool(args.lot) == bool(args.rules):
        raise UsageError("choose exactly one of --lot or --rules")
    kb, registry = _load_inputs(args)
    if args.what_if:
        if not args.lot:
            raise UsageError("--what-if needs a --lot entry point")
        modifications = [_parse_modification(m) for m in args.what_if]
        report = what_if(kb, args.lot, modifications, registry)
        payload = (_whatif_structured(report) if args.format == "structured"
                   else _whatif_text(report))
        _emit(payload, args.out)
        return 0
    trace = ReasoningTrace()
    if args.rules:
        rules = kb.rule_sets.get(args.rules)
        if rules is None:
            raise KeraiaError(f"no rule set named {args.rules!r}")
        forward_chain(kb, rules, max_cycles=args.max_ticks or 64,
                      clock=kb.clock, trace=trace)
    else:
        chain_lots(kb, args.lot, registry, trace=trace,
                   max_ticks=args.max_ticks)
    payload = (trace.to_jsonl() if args.format == "structured"
               else narrative(trace))
    _emit(payload, args.out)
    errored = [e for e in trace.events if e.kind == "Errored"]
    if errored:
        tail = narrative(trace).rstrip("\n").splitlines()[-5:]
        print("run errored:", file=sys.stderr)
        for line in tail:
            print(f"  {line}", file=sys.stderr)
        return 1
    return 0


def cmd_query(args) -> int:
    kb, _ = _load_inputs(args)
    context = None
    if args.dimension:
        context = kb.dimensions.get(args.dimension)
        if context is None:
            raise KeraiaError(f"no dimension named {args.dimension!r}")
    value = resolve_kline(kb, args.path, context)
    print(json.dumps(canonical(value), sort_keys=True))
    return 0


def cmd_risk(args) -> int:
    from .risk import simulate_game, write_report
    from .risk.bots import BOT_KINDS
    bots = [b.strip() for b in args.bots.split(",") if b.strip()]
    if not bots:
        raise UsageError("--bots needs at least one bot kind")
    unknown = [b for b in bots if b not in BOT_KINDS]
    if unknown:
        raise UsageError(f"unknown bot kind(s) {', '.join(unknown)}; "
                         f"choose from {', '.join(BOT_KINDS)}")
    if args.games < 1:
        raise UsageError("--games must be at least 1")
    results = [simulate_game(bots, seed=args.seed + i,
                             max_turns=args.max_turns)
               for i in range(args.games)]
    paths = write_report(results, args.out)
    wins = [sum(r.winner == p for r in results) for p in range(len(bots))]
    for player, (kind, won) in enumerate(zip(bots, wins)):
        print(f"P{player} {kind}: {won}/{args.games} wins "
              f"({won / args.games:.2f})")
    print(f"wrote {paths['results']}, {paths['series']}, {paths['figure']}")
    return 0


def cmd_trace_export(args) -> int:
    try:
        with open(args.input) as handle:
            records = [json.loads(line) for line in handle
                       if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise KeraiaError(f"cannot read trace {args.input!r}: {exc}")
    if args.format == "text":
        payload = narrative_from_records(
            [r for r in records if "kind" in r])
    else:
        payload = "\n".join(_dump(r) for r in records) + "\n"
    _emit(payload, args.out)
    return 0


class UsageError(Exception):
    pass


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "check": cmd_check,
        "run": cmd_run,
        "query": cmd_query,
        "risk": cmd_risk,
    }
    try:
        if args.command == "trace":
            return cmd_trace_export(args)
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (KeraiaError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
