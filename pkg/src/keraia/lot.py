"""Lines of thought: ordered, forkable reasoning traces over the base.

Each step activates one knowledge source and either runs a responder or a
rule set.  A fork evaluates its branches in order and the first satisfied
guard decides where control goes: the next step, a step index, or another
line of thought (a tail jump).  Any error inside a step ends the trace with
an Errored event.  Successful rule reads reinforce KLine weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .conditions import Env, eval_condition
from .errors import (
    DepthLimitExceeded,
    EmptyCandidates,
    ForkPredicateError,
    KeraiaError,
    UnknownLoT,
)
from .events import ResponderRegistry, run_responder
from .model import KnowledgeBase, slot_get
from .rules import forward_chain
from .trace import ReasoningTrace, render_explains

DEPTH_LIMIT = 16


@dataclass
class Branch:
    label: str
    guard: str = ""                # empty guard always holds
    kind: str = "continue"         # "continue" | "step" | "lot"
    target: Any = None


@dataclass
class Fork:
    branches: list = field(default_factory=list)


@dataclass
class Step:
    ks: str
    action: str                    # "respond" | "rules"
    name: str
    fork: Optional[Fork] = None


@dataclass
class LineOfThought:
    appellation: str
    steps: list = field(default_factory=list)
    junctures: list = field(default_factory=list)


def _render_step_explain(kb: KnowledgeBase, ks: str) -> str:
    source = kb.ks(ks)

    def read(path: str) -> Any:
        return slot_get(source.slots, tuple(path.replace(".", "/").split("/")))

    return render_explains(source.explains, read, f"activated {ks}")


def run_lot(kb: KnowledgeBase, name: str, registry: ResponderRegistry,
            inputs: Optional[dict] = None,
            trace: Optional[ReasoningTrace] = None,
            max_depth: int = DEPTH_LIMIT, _depth: int = 0,
            max_ticks: Optional[int] = None,
            _deadline: Optional[int] = None) -> ReasoningTrace:
    """Run one line of thought to completion, appending to ``trace``."""
    if trace is None:
        trace = ReasoningTrace()
    if _deadline is None and max_ticks is not None:
        _deadline = kb.clock + max_ticks
    if _depth >= max_depth:
        trace.errored(kb.clock, name, "DepthLimitExceeded",
                      f"nesting beyond {max_depth} lines of thought")
        return trace
    lot = kb.lots.get(name)
    if lot is None:
        raise UnknownLoT(f"no line of thought named {name!r}")
    index = 0
    while 0 <= index < len(lot.steps):
        if _deadline is not None and kb.clock >= _deadline:
            trace.errored(kb.clock, f"{name}[{index}]", "TickLimitExceeded",
                          f"run exceeded its {_deadline} tick budget")
            return trace
        step = lot.steps[index]
        kb.clock += 1
        try:
            input_digest = kb.ks_digest(step.ks)
            trace.step_activated(kb.clock, name, index, step.ks, step.action,
                                 step.name, input_digest,
                                 _render_step_explain(kb, step.ks))
            if step.action == "respond":
                run_responder(kb, registry, step.ks, step.name,
                              inputs=inputs, trace=trace)
            elif step.action == "rules":
                rules = kb.rule_sets.get(step.name)
                if rules is None:
                    raise UnknownLoT(f"no rule set named {step.name!r}")
                forward_chain(kb, rules, clock=kb.clock, trace=trace)
            else:
                raise KeraiaError(f"unknown step action {step.action!r}")
            trace.step_completed(kb.clock, name, index, step.ks,
                                 kb.ks_digest(step.ks))
        except KeraiaError as exc:
            trace.errored(kb.clock, f"{name}[{index}]",
                          type(exc).__name__, str(exc))
            return trace
        if step.fork is None:
            index += 1
            continue
        try:
            taken, values = _decide(kb, step, inputs)
        except KeraiaError as exc:
            trace.errored(kb.clock, f"{name}[{index}]",
                          type(exc).__name__, str(exc))
            return trace
        untaken = [b.label for b in step.fork.branches if b.label != taken.label]
        trace.fork_taken(kb.clock, name, index, taken.label, untaken, values)
        if taken.kind == "continue":
            index += 1
        elif taken.kind == "step":
            index = int(taken.target)
            if not 0 <= index < len(lot.steps):
                trace.errored(kb.clock, f"{name}[{index}]", "ForkPredicateError",
                              f"branch {taken.label!r} jumps outside the line")
                return trace
        elif taken.kind == "lot":
            return run_lot(kb, str(taken.target), registry, inputs=inputs,
                           trace=trace, max_depth=max_depth, _depth=_depth + 1,
                           _deadline=_deadline)
        else:
            trace.errored(kb.clock, f"{name}[{index}]", "ForkPredicateError",
                          f"unknown branch kind {taken.kind!r}")
            return trace
    return trace


def _decide(kb: KnowledgeBase, step: Step,
            inputs: Optional[dict]) -> tuple[Branch, dict]:
    values: dict[str, bool] = {}
    taken: Optional[Branch] = None
    for branch in step.fork.branches:
        if not branch.guard:
            held = True
        else:
            env = Env(kb=kb, roles={"self": step.ks},
                      vars=dict(inputs or {}), clock=kb.clock)
            try:
                held = eval_condition(branch.guard, env)
            except KeraiaError as exc:
                raise ForkPredicateError(
                    f"branch {branch.label!r}: {exc}") from exc
        values[branch.label] = held
        if held and taken is None:
            taken = branch
    if taken is None:
        raise ForkPredicateError("no branch guard held")
    return taken, values


def chain_lots(kb: KnowledgeBase, names: list, registry: ResponderRegistry,
               inputs: Optional[dict] = None,
               trace: Optional[ReasoningTrace] = None,
               max_ticks: Optional[int] = None) -> ReasoningTrace:
    """Run several lines of thought back to back on the same base."""
    if trace is None:
        trace = ReasoningTrace()
    deadline = kb.clock + max_ticks if max_ticks is not None else None
    for name in names:
        run_lot(kb, name, registry, inputs=inputs, trace=trace,
                _deadline=deadline)
        if trace.events and trace.events[-1].kind == "Errored":
            break
    return trace


# --- KLine weights ---------------------------------------------------------

def reinforce_kline(weights: dict, trace: ReasoningTrace) -> dict:
    """Add one to every path read by the trace's fired rules; no decay."""
    out = dict(weights)
    for event in trace.events:
        if event.kind != "RuleFired":
            continue
        for path in event.data.get("read_paths", ()):
            out[path] = out.get(path, 0) + 1
    return out


def select_kline(weights: dict, candidates: list) -> str:
    """Highest weight wins; ties go to the lexicographically first path."""
    if not candidates:
        raise EmptyCandidates("no candidate paths to select from")
    return min(candidates, key=lambda p: (-weights.get(p, 0), p))
