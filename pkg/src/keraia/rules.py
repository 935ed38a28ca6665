"""Forward-chaining production system over a working memory of triples.

Facts are (subject, path, value) triples; knowledge-base slots are projected
into facts and transient assertions live alongside them.  The recognise-act
cycle fires one instance per cycle, never refires a (rule, bindings) pair,
and orders the agenda by salience, then specificity (pattern count), then
rule definition order.  Matching is a naive nested-loop join; aggregations
reduce the candidate set after matching, guards filter after aggregation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence, Union

from .conditions import Env, eval_condition, eval_expression
from .errors import UnboundVariable
from .model import UNSET, KnowledgeBase, Quantity, Ref, canonical
from .paths import kline_of
from .trace import ReasoningTrace


@dataclass(frozen=True)
class Var:
    name: str


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    return value


@dataclass(frozen=True)
class Fact:
    subject: str
    path: tuple = ()
    value: Any = True

    def kline(self) -> str:
        return kline_of(self.subject, tuple(str(p) for p in self.path))


@dataclass(frozen=True)
class Pattern:
    """Template over facts; ``absent`` inverts it to negation-as-absence."""

    subject: Union[str, Var]
    path: tuple = ()
    value: Any = True
    absent: bool = False

    def variables(self) -> set[str]:
        names = set()
        for part in (self.subject, self.value, *self.path):
            if isinstance(part, Var):
                names.add(part.name)
        return names


@dataclass(frozen=True)
class Aggregate:
    """Keep only bindings where ``var`` reaches the set-wide min or max."""

    kind: str                      # "min" or "max"
    var: str
    as_var: str


# --- consequent actions ----------------------------------------------------

@dataclass(frozen=True)
class Assert:
    subject: Union[str, Var]
    path: tuple = ()
    value: Any = True

    def variables(self) -> set[str]:
        return {p.name for p in (self.subject, self.value, *self.path)
                if isinstance(p, Var)}


@dataclass(frozen=True)
class SetSlot:
    ks: Union[str, Var]
    path: Union[str, tuple]
    value: Any

    def variables(self) -> set[str]:
        parts = [self.ks, self.value]
        if isinstance(self.path, tuple):
            parts.extend(self.path)
        return {p.name for p in parts if isinstance(p, Var)}


@dataclass(frozen=True)
class Emit:
    """Computed output (a command, a pulse payload) built from bindings."""

    build: Callable[[dict], Any]
    requires: tuple = ()

    def variables(self) -> set[str]:
        return set(self.requires)


@dataclass(frozen=True)
class Respond:
    ks: Union[str, Var]
    responder: str

    def variables(self) -> set[str]:
        return {self.ks.name} if isinstance(self.ks, Var) else set()


Action = Union[Assert, SetSlot, Emit, Respond]


@dataclass
class Rule:
    name: str
    rule_set: str
    patterns: list = field(default_factory=list)
    condition: str = ""            # whole-base boolean condition (no variables)
    guards: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    salience: int = 0
    order: int = 0

    def __post_init__(self) -> None:
        bound: set[str] = set()
        for pattern in self.patterns:
            if pattern.absent:
                continue
            bound |= pattern.variables()
        for pattern in self.patterns:
            if pattern.absent:
                loose = pattern.variables() - bound
                if loose:
                    raise UnboundVariable(
                        f"rule {self.name}: absent pattern binds {sorted(loose)}")
        for agg in self.aggregates:
            if agg.var not in bound:
                raise UnboundVariable(
                    f"rule {self.name}: aggregate over unbound {agg.var!r}")
            bound.add(agg.as_var)
        for action in self.actions:
            loose = action.variables() - bound
            if loose:
                raise UnboundVariable(
                    f"rule {self.name}: action uses unbound {sorted(loose)}")

    @property
    def specificity(self) -> int:
        return len(self.patterns) + (1 if self.condition else 0)


class WorkingMemory:
    """Fact store with per-subject indexing and provenance of slot facts."""

    def __init__(self) -> None:
        self.facts: set[Fact] = set()
        self._by_subject: dict[str, set[Fact]] = {}
        self.slot_backed: set[tuple] = set()   # (subject, path) pairs from the kb

    def add(self, fact: Fact, slot_backed: bool = False) -> bool:
        if fact in self.facts:
            return False
        self.facts.add(fact)
        self._by_subject.setdefault(fact.subject, set()).add(fact)
        if slot_backed:
            self.slot_backed.add((fact.subject, fact.path))
        return True

    def discard(self, fact: Fact) -> None:
        self.facts.discard(fact)
        bucket = self._by_subject.get(fact.subject)
        if bucket:
            bucket.discard(fact)

    def replace_slot_fact(self, subject: str, path: tuple, value: Any) -> None:
        for fact in list(self._by_subject.get(subject, ())):
            if fact.path == path:
                self.discard(fact)
        self.add(Fact(subject, path, value), slot_backed=True)

    def candidates(self, subject: Any) -> Iterable[Fact]:
        if isinstance(subject, str):
            return self._by_subject.get(subject, ())
        return self.facts

    @staticmethod
    def from_kb(kb: KnowledgeBase, extra: Iterable[Fact] = ()) -> "WorkingMemory":
        wm = WorkingMemory()
        for ks in kb.iter_ks():
            for path, value in _leaves(ks.slots):
                wm.add(Fact(ks.appellation, path, _freeze(value)),
                       slot_backed=True)
        for fact in extra:
            wm.add(fact)
        return wm


def _leaves(slots: dict, prefix: tuple = ()) -> Iterator[tuple[tuple, Any]]:
    for key in slots:
        value = slots[key]
        if isinstance(value, dict):
            yield from _leaves(value, prefix + (key,))
        elif value is not UNSET:
            yield prefix + (key,), value


def _resolve_part(part: Any, bindings: dict) -> Any:
    if isinstance(part, Var):
        return bindings[part.name]
    if callable(part) and not isinstance(part, (str, bytes)):
        return part(bindings)
    return part


def _match_fact(pattern: Pattern, fact: Fact, bindings: dict) -> Optional[dict]:
    out = bindings
    pairs = [(pattern.subject, fact.subject)]
    if len(pattern.path) != len(fact.path):
        return None
    pairs.extend(zip(pattern.path, fact.path))
    pairs.append((pattern.value, fact.value))
    for want, got in pairs:
        if isinstance(want, Var):
            if want.name in out:
                if out[want.name] != got:
                    return None
            else:
                if out is bindings:
                    out = dict(bindings)
                out[want.name] = got
        elif want is not ANY and want != got:
            return None
    return out if out is not bindings else dict(bindings)


class _Any:
    def __repr__(self) -> str:
        return "ANY"


ANY = _Any()


def _subject_key(pattern: Pattern, bindings: dict) -> Any:
    if isinstance(pattern.subject, Var):
        return bindings.get(pattern.subject.name, pattern.subject)
    return pattern.subject


def match_rule(rule: Rule, wm: WorkingMemory, kb: Optional[KnowledgeBase],
               clock: int = 0) -> list[tuple[dict, tuple, set]]:
    """All (bindings, matched facts, read paths) for a rule, in canonical order."""
    states: list[tuple[dict, tuple]] = [({}, ())]
    for pattern in rule.patterns:
        next_states: list[tuple[dict, tuple]] = []
        if pattern.absent:
            for bindings, used in states:
                hit = False
                for fact in wm.candidates(_subject_key(pattern, bindings)):
                    if _match_fact(pattern, fact, bindings) is not None:
                        hit = True
                        break
                if not hit:
                    next_states.append((bindings, used))
        else:
            for bindings, used in states:
                for fact in wm.candidates(_subject_key(pattern, bindings)):
                    extended = _match_fact(pattern, fact, bindings)
                    if extended is not None:
                        next_states.append((extended, used + (fact,)))
        states = next_states
        if not states:
            return []
    results = []
    for bindings, used in states:
        reads = {f.kline() for f in used if (f.subject, f.path) in wm.slot_backed}
        if rule.condition:
            env = Env(kb=kb, vars=dict(bindings), clock=clock, reads=reads)
            if not eval_condition(rule.condition, env):
                continue
        results.append((bindings, used, reads))
    for agg in rule.aggregates:
        if not results:
            break
        values = [b[agg.var] for b, _, _ in results]
        best = min(values) if agg.kind == "min" else max(values)
        kept = []
        for bindings, used, reads in results:
            if bindings[agg.var] == best:
                bindings = dict(bindings)
                bindings[agg.as_var] = best
                kept.append((bindings, used, reads))
        results = kept
    filtered = []
    for bindings, used, reads in results:
        ok = True
        for guard in rule.guards:
            env = Env(kb=kb, vars=dict(bindings), clock=clock, reads=reads)
            if not eval_condition(guard, env):
                ok = False
                break
        if ok:
            filtered.append((bindings, used, reads))
    filtered.sort(key=lambda item: _bindings_key(item[0]))
    return filtered


def _bindings_key(bindings: dict) -> str:
    return json.dumps({k: canonical(v) for k, v in sorted(bindings.items())},
                      sort_keys=True, default=repr)


@dataclass
class ChainResult:
    fired: list = field(default_factory=list)      # (rule name, bindings) pairs
    emitted: list = field(default_factory=list)
    wm: Optional[WorkingMemory] = None
    cycles: int = 0
    capped: bool = False


def forward_chain(kb: Optional[KnowledgeBase], rules: Sequence[Rule],
                  wm: Optional[WorkingMemory] = None,
                  extra_facts: Iterable[Fact] = (),
                  max_cycles: int = 1000,
                  clock: int = 0,
                  trace: Optional[ReasoningTrace] = None,
                  cause_prefix: str = "rule") -> ChainResult:
    """Run the recognise-act cycle to quiescence (or the cycle cap)."""
    if wm is None:
        wm = WorkingMemory.from_kb(kb, extra_facts) if kb is not None \
            else WorkingMemory()
        if kb is None:
            for fact in extra_facts:
                wm.add(fact)
    ordered = sorted(rules, key=lambda r: r.order)
    result = ChainResult(wm=wm)
    fired_keys: set = set()
    while result.cycles < max_cycles:
        agenda = []
        for rule in ordered:
            for bindings, used, reads in match_rule(rule, wm, kb, clock):
                key = (rule.name, _bindings_key(bindings))
                if key in fired_keys:
                    continue
                agenda.append((-rule.salience, -rule.specificity, rule.order,
                               _bindings_key(bindings), rule, bindings, reads, key))
        if not agenda:
            break
        agenda.sort(key=lambda item: item[:4])
        _, _, _, _, rule, bindings, reads, key = agenda[0]
        fired_keys.add(key)
        result.cycles += 1
        _apply_actions(rule, bindings, wm, kb, result, clock, trace, cause_prefix)
        if trace is not None:
            trace.rule_fired(clock, rule.name, rule.rule_set, bindings, reads)
        result.fired.append((rule.name, dict(bindings)))
    else:
        result.capped = True
    return result


def _apply_actions(rule: Rule, bindings: dict, wm: WorkingMemory,
                   kb: Optional[KnowledgeBase], result: ChainResult,
                   clock: int, trace: Optional[ReasoningTrace],
                   cause_prefix: str) -> None:
    for action in rule.actions:
        if isinstance(action, Assert):
            fact = Fact(
                subject=_resolve_part(action.subject, bindings),
                path=tuple(_resolve_part(p, bindings) for p in action.path),
                value=_freeze(_resolve_part(action.value, bindings)))
            wm.add(fact)
        elif isinstance(action, SetSlot):
            if kb is None:
                continue
            ks = _resolve_part(action.ks, bindings)
            path = action.path
            if isinstance(path, tuple):
                path = tuple(str(_resolve_part(p, bindings)) for p in path)
            value = _resolve_part(action.value, bindings)
            entry = kb.set_slot(ks, path, value, cause=f"{cause_prefix}:{rule.name}")
            if entry is not None:
                wm.replace_slot_fact(ks, tuple(entry.path.split("/")),
                                     _freeze(value))
                if trace is not None:
                    trace.pulse_emitted(clock, ks, entry.path, entry.old,
                                        entry.new, entry.cause)
        elif isinstance(action, Emit):
            result.emitted.append(action.build(dict(bindings)))
        elif isinstance(action, Respond):
            result.emitted.append(
                ("respond", _resolve_part(action.ks, bindings), action.responder))
        else:
            raise TypeError(f"unknown action {action!r}")
