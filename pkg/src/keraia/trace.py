"""Append-only reasoning traces and their export format.

Events are flat records; export is line-delimited JSON.  Wall timestamps are
carried on every event and replaced by an empty string when an export is
normalised, which is the form replay comparison uses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Optional

from .model import canonical


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class TraceEvent:
    kind: str
    tick: int
    data: dict
    at: str = field(default_factory=_now)

    def record(self, normalize_timestamps: bool = True) -> dict:
        rec = {"kind": self.kind, "tick": self.tick,
               "at": "" if normalize_timestamps else self.at}
        rec.update({k: canonical(v) for k, v in sorted(self.data.items())})
        return rec

    def to_json(self, normalize_timestamps: bool = True) -> str:
        return json.dumps(self.record(normalize_timestamps),
                          sort_keys=True, separators=(",", ":"))


class ReasoningTrace:
    """Ordered, append-only record of one reasoning run."""

    def __init__(self) -> None:
        self.events: list[TraceEvent] = []

    def add(self, kind: str, tick: int, **data: Any) -> TraceEvent:
        event = TraceEvent(kind=kind, tick=tick, data=data)
        self.events.append(event)
        return event

    # -- event helpers ------------------------------------------------------

    def step_activated(self, tick: int, lot: str, index: int, ks: str,
                       action: str, name: str, input_digest: str,
                       explain: str) -> None:
        self.add("StepActivated", tick, lot=lot, step=index, ks=ks,
                 action=action, name=name, input_digest=input_digest,
                 explain=explain)

    def step_completed(self, tick: int, lot: str, index: int, ks: str,
                       output_digest: str) -> None:
        self.add("StepCompleted", tick, lot=lot, step=index, ks=ks,
                 output_digest=output_digest)

    def rule_fired(self, tick: int, rule: str, rule_set: str, bindings: dict,
                   read_paths: Iterable[str]) -> None:
        self.add("RuleFired", tick, rule=rule, rule_set=rule_set,
                 bindings={k: bindings[k] for k in sorted(bindings)},
                 read_paths=sorted(read_paths))

    def fork_taken(self, tick: int, lot: str, index: int, branch: str,
                   untaken: Iterable[str], values: dict) -> None:
        self.add("ForkTaken", tick, lot=lot, step=index, branch=branch,
                 untaken=list(untaken), values=values)

    def pulse_emitted(self, tick: int, source: str, path: str, old: Any,
                      new: Any, cause: str) -> None:
        self.add("PulseEmitted", tick, source=source, path=path, old=old,
                 new=new, cause=cause)

    def function_logged(self, tick: int, function: str, category: str,
                        source: str, output: str, inputs: Iterable[str],
                        outputs: Iterable[str]) -> None:
        self.add("FunctionLogged", tick, function=function, category=category,
                 source=source, output=output, inputs=sorted(inputs),
                 outputs=sorted(outputs))

    def errored(self, tick: int, where: str, error: str, message: str) -> None:
        self.add("Errored", tick, where=where, error=error, message=message)

    # -- export -------------------------------------------------------------

    def records(self, normalize_timestamps: bool = True) -> list[dict]:
        return [e.record(normalize_timestamps) for e in self.events]

    def to_jsonl(self, normalize_timestamps: bool = True) -> str:
        lines = [e.to_json(normalize_timestamps) for e in self.events]
        return "\n".join(lines) + ("\n" if lines else "")

    def same_as(self, other: "ReasoningTrace") -> bool:
        return self.to_jsonl() == other.to_jsonl()

    def kinds(self) -> list[str]:
        return [e.kind for e in self.events]

    def activation_sequence(self) -> list[str]:
        return [e.data["ks"] for e in self.events if e.kind == "StepActivated"]


def render_explains(template: str, read_slot, fallback: str) -> str:
    """Interpolate ``{path}`` placeholders via ``read_slot(path) -> value``.

    Unresolvable placeholders render as ``{?path}``; an empty template falls
    back to the given line.
    """
    if not template:
        return fallback
    out: list[str] = []
    i = 0
    while i < len(template):
        ch = template[i]
        if ch == "{":
            end = template.find("}", i + 1)
            if end < 0:
                out.append(template[i:])
                break
            path = template[i + 1:end]
            try:
                value = read_slot(path)
                out.append(_plain(value))
            except Exception:
                out.append("{?" + path + "}")
            i = end + 1
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _plain(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return json.dumps(canonical(value), sort_keys=True)
