"""KLine paths: slash-joined addresses from a cloud or source down to a slot.

``locate`` reduces a path to its canonical (knowledge source, slot segments)
address; ``resolve_kline`` reads the value there, letting a dimension's
assumptions shadow stored values.
"""

from __future__ import annotations

from typing import Any, Optional

from .errors import BadPath, UnknownSegment
from .model import Dimension, KnowledgeBase, slot_get, split_path


def parse_kline(path: str) -> tuple[str, ...]:
    if not isinstance(path, str) or not path:
        raise BadPath(f"bad kline path: {path!r}")
    return split_path(path)


def locate(kb: KnowledgeBase, path: "str | tuple[str, ...]") -> tuple[str, tuple[str, ...]]:
    """Walk a path down to (source appellation, slot segments).

    The first segment names a cloud or a source; inside a cloud each segment
    narrows to a direct member, with a source match taking precedence over a
    sub-cloud of the same name.
    """
    segments = parse_kline(path) if isinstance(path, str) else tuple(path)
    head, rest = segments[0], segments[1:]
    # a source match wins over a cloud of the same name; global uniqueness
    # makes the clash unreachable through the public API
    if head in kb.sources:
        return head, rest
    if head not in kb.clouds:
        raise UnknownSegment(f"{head!r} names neither a cloud nor a source")
    cloud = kb.clouds[head]
    walked = [head]
    while rest:
        seg, rest = rest[0], rest[1:]
        if seg in cloud.members:
            return seg, rest
        if seg in cloud.sub_clouds:
            cloud = kb.clouds[seg]
            walked.append(seg)
            continue
        raise UnknownSegment(f"{seg!r} not found under {'/'.join(walked)}")
    raise BadPath(f"path {'/'.join(segments)!r} stops at a cloud, not a slot")


def resolve_kline(kb: KnowledgeBase, path: str,
                  context: Optional[Dimension] = None) -> Any:
    """Read the value a path points at; context assumptions win over storage."""
    ks_name, slot_path = locate(kb, path)
    if context is not None:
        for assumed_path, assumed_value in context.assumptions:
            try:
                a_ks, a_slots = locate(kb, assumed_path)
            except (UnknownSegment, AmbiguousSegment, BadPath):
                continue
            if a_ks != ks_name:
                continue
            if a_slots == slot_path:
                return assumed_value
            if len(a_slots) < len(slot_path) and slot_path[:len(a_slots)] == a_slots:
                return slot_get({"_": assumed_value}, ("_",) + slot_path[len(a_slots):])
    return slot_get(kb.ks(ks_name).slots, slot_path)


def kline_of(ks: str, slot_path: "tuple[str, ...]") -> str:
    """Canonical source-rooted rendering of an address."""
    return "/".join((ks,) + tuple(slot_path))
