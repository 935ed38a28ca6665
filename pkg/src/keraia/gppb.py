"""Pattern templates: declarative blueprints that match variable patterns
over the base and generate new knowledge sources from an output shape.

A template couples an input pattern (slot patterns plus condition strings),
an instantiation map of pre-bound variables, and an output spec.  Matching is
read-only; application creates sources named ``<template>.<n>`` with a
monotonic counter, never touching the matched sources.  Assemblies group
templates so a whole collection can be run in one call.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional

from .conditions import Env, eval_condition
from .errors import AppellationConflict, UnboundVariable
from .model import KnowledgeBase, KnowledgeSource
from .rules import Pattern, Var, WorkingMemory, _bindings_key, _match_fact, \
    _subject_key
from .trace import ReasoningTrace


def _value_vars(value: Any) -> Iterator[str]:
    if isinstance(value, Var):
        yield value.name
    elif isinstance(value, dict):
        for item in value.values():
            yield from _value_vars(item)
    elif isinstance(value, (list, tuple)):
        for item in value:
            yield from _value_vars(item)


def _subst(value: Any, bindings: dict) -> Any:
    if isinstance(value, Var):
        if value.name not in bindings:
            raise UnboundVariable(f"output references unbound ?{value.name}")
        return bindings[value.name]
    if isinstance(value, dict):
        return {k: _subst(v, bindings) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_subst(v, bindings) for v in value]
    return value


@dataclass
class OutputKs:
    """One source the template generates: target cloud plus a slot shape.

    Slot values (and the cloud name) may hold Var placeholders filled from
    the match bindings.
    """

    cloud: Any
    slots: dict = field(default_factory=dict)


@dataclass
class GppbTemplate:
    name: str
    input_pattern: list = field(default_factory=list)   # Pattern | condition str
    instantiation: dict = field(default_factory=dict)
    output_spec: list = field(default_factory=list)     # of OutputKs

    def __post_init__(self) -> None:
        bound = set(self.instantiation)
        for item in self.input_pattern:
            if isinstance(item, Pattern) and not item.absent:
                bound |= item.variables()
        for item in self.input_pattern:
            if isinstance(item, Pattern) and item.absent:
                loose = item.variables() - bound
                if loose:
                    raise UnboundVariable(
                        f"template {self.name}: absent pattern cannot "
                        f"introduce {sorted(loose)}")
        for out in self.output_spec:
            loose = (set(_value_vars(out.cloud))
                     | set(_value_vars(out.slots))) - bound
            if loose:
                raise UnboundVariable(
                    f"template {self.name}: output references unbound "
                    f"{sorted(loose)}")


def _constraint_holds(kb: KnowledgeBase, text: str, bindings: dict,
                      clock: int) -> bool:
    roles = {k: v for k, v in bindings.items()
             if isinstance(v, str) and v in kb.sources}
    env = Env(kb=kb, roles=roles, vars=dict(bindings), clock=clock)
    return eval_condition(text, env)


def match_template(kb: KnowledgeBase, tpl: GppbTemplate) -> list[dict]:
    """All maximal binding sets satisfying the pattern; read-only."""
    wm = WorkingMemory.from_kb(kb)
    states: list[dict] = [dict(tpl.instantiation)]
    for item in tpl.input_pattern:
        if isinstance(item, str):
            states = [b for b in states
                      if _constraint_holds(kb, item, b, kb.clock)]
        elif item.absent:
            states = [b for b in states
                      if not any(_match_fact(item, fact, b) is not None
                                 for fact in wm.candidates(_subject_key(item, b)))]
        else:
            next_states = []
            for bindings in states:
                for fact in wm.candidates(_subject_key(item, bindings)):
                    extended = _match_fact(item, fact, bindings)
                    if extended is not None:
                        next_states.append(extended)
            states = next_states
        if not states:
            return []
    unique = {_bindings_key(b): b for b in states}
    return [unique[key] for key in sorted(unique)]


def _next_counter(kb: KnowledgeBase, stem: str) -> int:
    suffix = re.compile(re.escape(stem) + r"\.(\d+)$")
    taken = [int(m.group(1)) for name in kb.sources
             if (m := suffix.fullmatch(name))]
    return max(taken, default=0) + 1


def apply_template(kb: KnowledgeBase, tpl: GppbTemplate, bindings: dict,
                   trace: Optional[ReasoningTrace] = None) -> list[str]:
    """Generate the template's output structure for one binding set.

    Returns the created appellations; matched sources are never modified.
    """
    kb.clock += 1
    created: list[str] = []
    counter = _next_counter(kb, tpl.name)
    for out in tpl.output_spec:
        name = f"{tpl.name}.{counter}"
        if name in kb.sources or name in kb.clouds:
            raise AppellationConflict(f"generated name {name!r} is taken")
        cloud = _subst(out.cloud, bindings)
        if cloud not in kb.clouds:
            kb.put_cloud(cloud)
        kb.put_ks(cloud, KnowledgeSource(name, slots=_subst(out.slots, bindings)))
        created.append(name)
        counter += 1
    if trace is not None:
        trace.add("TemplateApplied", kb.clock, template=tpl.name,
                  bindings={k: bindings[k] for k in sorted(bindings)},
                  created=list(created))
    return created


@dataclass
class Assembly:
    """A named, ordered collection of templates run as one unit."""

    name: str
    templates: list = field(default_factory=list)


def run_assembly(kb: KnowledgeBase, assembly: Assembly,
                 trace: Optional[ReasoningTrace] = None) -> list[str]:
    """Match and apply every template in order; returns all created names."""
    created: list[str] = []
    for tpl in assembly.templates:
        for bindings in match_template(kb, tpl):
            created.extend(apply_template(kb, tpl, bindings, trace=trace))
    return created
