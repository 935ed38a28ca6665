"""Dynamic relationships: conditional attribute inheritance between
knowledge sources.

A DRel lets its target source inherit the listed shared attributes from its
source while the condition holds.  Resolution is single-hop unless asked
otherwise, a local value always wins, and among competing satisfied DRels
the highest priority wins with ties broken by appellation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .conditions import Env, eval_condition
from .errors import InheritanceCycle, Unresolvable
from .model import UNSET, KnowledgeBase, slot_get, split_path


@dataclass
class DRel:
    """Directed conditional sharing of attributes from source to target."""

    appellation: str
    source: str
    target: str
    shared: list[str] = field(default_factory=list)
    condition: str = "true"
    priority: int = 0

    def covers(self, path: tuple[str, ...]) -> bool:
        for attr in self.shared:
            attr_path = split_path(attr)
            if attr_path == path[:len(attr_path)]:
                return True
        return False


@dataclass(frozen=True)
class Provenance:
    """Where a resolved attribute value came from."""

    kind: str                      # "local" or "inherited"
    drel: str = ""
    provider: str = ""
    hops: tuple[str, ...] = ()

    @property
    def is_local(self) -> bool:
        return self.kind == "local"


def _condition_holds(kb: KnowledgeBase, drel: DRel, clock: int) -> bool:
    env = Env(kb=kb, roles={"source": drel.source, "target": drel.target},
              clock=clock)
    return eval_condition(drel.condition, env)


def active_drels(kb: KnowledgeBase, ks: str, clock: int = 0) -> list[DRel]:
    """Satisfied DRels through which ``ks`` currently inherits, ranked."""
    found = [d for d in kb.drels
             if d.target == ks and _condition_holds(kb, d, clock)]
    found.sort(key=lambda d: (-d.priority, d.appellation))
    return found


def _local_value(kb: KnowledgeBase, ks: str, path: tuple[str, ...]) -> Any:
    value = slot_get(kb.ks(ks).slots, path)
    if value is UNSET:
        raise Unresolvable(f"slot {'/'.join(path)!r} on {ks} is unset")
    return value


def resolve_attribute(kb: KnowledgeBase, ks: str, path: "str | Sequence[str]",
                      clock: int = 0, multi_hop: bool = False,
                      _visited: Optional[tuple] = None) -> tuple[Any, Provenance]:
    """Resolve an attribute locally or through active DRels.

    Returns (value, provenance).  Raises Unresolvable when neither the source
    itself nor any satisfied DRel can provide the value.
    """
    segments = split_path(path)
    visited = _visited or (ks,)
    try:
        return _local_value(kb, ks, segments), Provenance(kind="local")
    except Unresolvable:
        pass
    for drel in active_drels(kb, ks, clock):
        if not drel.covers(segments):
            continue
        provider = drel.source
        if provider in visited:
            raise InheritanceCycle(
                f"inheritance loops back to {provider} via {drel.appellation}")
        try:
            value = _local_value(kb, provider, segments)
            return value, Provenance(kind="inherited", drel=drel.appellation,
                                     provider=provider, hops=visited[1:] + (provider,))
        except Unresolvable:
            if not multi_hop:
                continue
        try:
            value, deeper = resolve_attribute(
                kb, provider, segments, clock, multi_hop=True,
                _visited=visited + (provider,))
        except Unresolvable:
            continue
        return value, Provenance(kind="inherited", drel=drel.appellation,
                                 provider=provider, hops=deeper.hops or
                                 visited[1:] + (provider,))
    raise Unresolvable(
        f"{ks} has no local or inherited value at {'/'.join(segments)!r}")
