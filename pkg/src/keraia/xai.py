"""Explanation surfaces: narratives, counterfactual comparison, history.

``what_if`` runs the same line of thought on two snapshots (baseline and a
modified variant) with the same starting clock and reports the first event
where the normalised traces part ways, plus a slot-level diff of the final
states.  ``replay`` reruns a stored run from its snapshot and compares the
exported bytes after timestamp normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .model import KnowledgeBase, canonical_json
from .paths import locate
from .events import ResponderRegistry
from .lot import chain_lots
from .trace import ReasoningTrace


def narrative(trace: ReasoningTrace) -> str:
    """Human-readable rendering of a trace, one line per event."""
    lines = []
    for event in trace.events:
        d = event.data
        if event.kind == "StepActivated":
            lines.append(f"[{event.tick}] {d['explain']}")
        elif event.kind == "StepCompleted":
            continue
        elif event.kind == "RuleFired":
            reads = ", ".join(d["read_paths"]) or "no stored slots"
            lines.append(f"[{event.tick}] rule {d['rule']} of set "
                         f"{d['rule_set']} fired (read {reads})")
        elif event.kind == "ForkTaken":
            skipped = ", ".join(repr(u) for u in d["untaken"]) or "none"
            lines.append(f"[{event.tick}] fork: took {d['branch']!r}; "
                         f"not taken: {skipped}")
        elif event.kind == "PulseEmitted":
            lines.append(f"[{event.tick}] {d['source']}/{d['path']} "
                         f"changed by {d['cause']}")
        elif event.kind == "FunctionLogged":
            lines.append(f"[{event.tick}] {d['function']} derived {d['output']} "
                         f"from {d['source']}")
        elif event.kind == "Errored":
            lines.append(f"[{event.tick}] error in {d['where']}: "
                         f"{d['error']}: {d['message']}")
        else:
            lines.append(f"[{event.tick}] {event.kind}")
    return "\n".join(lines) + ("\n" if lines else "")


def narrative_from_records(records: list) -> str:
    """Same rendering, from exported records (used by the trace command)."""
    trace = ReasoningTrace()
    for rec in records:
        data = {k: v for k, v in rec.items() if k not in ("kind", "tick", "at")}
        trace.add(rec["kind"], rec["tick"], **data)
    return narrative(trace)


@dataclass
class WhatIfReport:
    modifications: list
    baseline_trace: ReasoningTrace
    variant_trace: ReasoningTrace
    divergence_index: Optional[int]
    outcome_diff: list = field(default_factory=list)
    baseline_kb: Optional[KnowledgeBase] = None
    variant_kb: Optional[KnowledgeBase] = None

    @property
    def diverged(self) -> bool:
        return self.divergence_index is not None

    def divergence_events(self) -> tuple:
        if self.divergence_index is None:
            return (None, None)
        base = self.baseline_trace.records()
        var = self.variant_trace.records()
        i = self.divergence_index
        return (base[i] if i < len(base) else None,
                var[i] if i < len(var) else None)


def _leaf_map(kb: KnowledgeBase) -> dict:
    leaves: dict[str, Any] = {}

    def walk(prefix: str, node: Any) -> None:
        if isinstance(node, dict):
            for key in node:
                walk(f"{prefix}/{key}", node[key])
        else:
            leaves[prefix] = canonical_json(node)

    for ks in kb.iter_ks():
        walk(ks.appellation, ks.slots)
    return leaves


def state_diff(baseline: KnowledgeBase, variant: KnowledgeBase) -> list:
    """Leaf-level differences as (path, baseline value, variant value)."""
    base, var = _leaf_map(baseline), _leaf_map(variant)
    out = []
    for path in sorted(set(base) | set(var)):
        if base.get(path) != var.get(path):
            out.append((path, base.get(path, "absent"), var.get(path, "absent")))
    return out


def first_divergence(a: ReasoningTrace, b: ReasoningTrace) -> Optional[int]:
    a_recs, b_recs = a.records(), b.records()
    for i, (ra, rb) in enumerate(zip(a_recs, b_recs)):
        if ra != rb:
            return i
    if len(a_recs) != len(b_recs):
        return min(len(a_recs), len(b_recs))
    return None


def what_if(kb: KnowledgeBase, lot: str, modifications: list,
            registry: ResponderRegistry,
            inputs: Optional[dict] = None) -> WhatIfReport:
    """Compare a run against the same run with slots modified up front.

    ``modifications`` is a list of (kline path, new value) pairs applied to
    the variant snapshot before it runs.
    """
    baseline = kb.snapshot()
    variant = kb.snapshot()
    for path, value in modifications:
        ks, slots = locate(variant, path)
        variant.set_slot(ks, slots, value, cause="what_if")
    names = [lot] if isinstance(lot, str) else list(lot)
    base_trace = chain_lots(baseline, names, registry, inputs=inputs)
    var_trace = chain_lots(variant, names, registry, inputs=inputs)
    return WhatIfReport(
        modifications=list(modifications),
        baseline_trace=base_trace,
        variant_trace=var_trace,
        divergence_index=first_divergence(base_trace, var_trace),
        outcome_diff=state_diff(baseline, variant),
        baseline_kb=baseline,
        variant_kb=variant,
    )


def history(kb: KnowledgeBase, appellation: str,
            path: Optional[str] = None) -> list:
    """Version-log entries for one source, optionally filtered to a path."""
    entries = kb.history(appellation)
    if path is not None:
        entries = [e for e in entries
                   if e.path == path or e.path.startswith(path + "/")
                   or e.path == ""]
    return entries


def replay_lot(kb_snapshot: KnowledgeBase, lot: "str | list",
               registry: ResponderRegistry,
               inputs: Optional[dict] = None) -> tuple[ReasoningTrace, str]:
    """Run from a snapshot and export normalised bytes for comparison."""
    working = kb_snapshot.snapshot()
    names = [lot] if isinstance(lot, str) else list(lot)
    trace = chain_lots(working, names, registry, inputs=inputs)
    return trace, trace.to_jsonl(normalize_timestamps=True)
