"""Core knowledge model: slot values, knowledge sources, clouds, and the
versioned knowledge base they live in.

Values stored in slots are plain Python scalars, lists and string-keyed maps,
plus three small wrappers: :class:`Quantity` (number with a unit annotation),
:class:`Ref` (a by-name reference to another knowledge source) and the
explicit :data:`UNSET` marker.  Every committed mutation bumps the owning
source's version counter by exactly one and appends one entry to the
knowledge base's append-only version log.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Iterator, Optional, Sequence

from .errors import (
    AppellationConflict,
    BadAppellation,
    BadPath,
    BadSlotValue,
    CloudCycle,
    PathThroughScalar,
    UnknownCloud,
    UnknownKS,
    Unresolvable,
)

APPELLATION_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class _Unset:
    """Singleton marker for an explicitly absent value."""

    _instance: Optional["_Unset"] = None

    def __new__(cls) -> "_Unset":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "unset"

    def __deepcopy__(self, memo: dict) -> "_Unset":
        return self


UNSET = _Unset()


@dataclass(frozen=True)
class Quantity:
    """Numeric value carrying a unit annotation; the unit is informational."""

    magnitude: float
    unit: str


@dataclass(frozen=True)
class Ref:
    """By-name reference to another knowledge source."""

    appellation: str


def check_appellation(name: str) -> str:
    if not isinstance(name, str) or not APPELLATION_RE.match(name):
        raise BadAppellation(f"bad appellation: {name!r}")
    return name


def check_value(value: Any) -> Any:
    """Validate a slot value, returning it unchanged."""
    if value is UNSET or isinstance(value, (bool, int, float, str, Quantity, Ref)):
        return value
    if isinstance(value, list):
        for item in value:
            check_value(item)
        return value
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise BadSlotValue(f"map keys must be strings, got {key!r}")
            check_value(item)
        return value
    raise BadSlotValue(f"unsupported slot value: {value!r}")


def canonical(value: Any) -> Any:
    """Reduce a slot value to a JSON-serialisable canonical form."""
    if value is UNSET:
        return {"~unset": True}
    if isinstance(value, Quantity):
        return {"~quantity": [value.magnitude, value.unit]}
    if isinstance(value, Ref):
        return {"~ref": value.appellation}
    if isinstance(value, list):
        return [canonical(v) for v in value]
    if isinstance(value, dict):
        return {k: canonical(v) for k, v in value.items()}
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(canonical(value), sort_keys=True, separators=(",", ":"))


def split_path(path: "str | Sequence[str]") -> tuple[str, ...]:
    """Accept 'a/b/c' or an iterable of segments; reject empty segments."""
    if isinstance(path, str):
        segments = tuple(path.split("/"))
    else:
        segments = tuple(path)
    if not segments or any(not s for s in segments):
        raise BadPath(f"bad slot path: {path!r}")
    return segments


def slot_get(slots: dict, path: Sequence[str]) -> Any:
    """Walk a nested slot map; missing key -> Unresolvable."""
    node: Any = slots
    for i, seg in enumerate(path):
        if not isinstance(node, dict):
            raise PathThroughScalar(f"cannot descend into {'/'.join(path[:i])!r}")
        if seg not in node:
            raise Unresolvable(f"no slot at {'/'.join(path)!r}")
        node = node[seg]
    return node


@dataclass
class AttractorBinding:
    """Activation trigger owned by a knowledge source.

    The condition is evaluated against pulses from the watched source (the
    owner itself when ``watch`` is empty); a true condition invokes the named
    responder.
    """

    condition: str
    responder: str
    watch: str = ""


@dataclass
class ResponderBinding:
    """Named binding of a registry operation, with fixed parameters."""

    name: str
    op: str
    params: dict = field(default_factory=dict)
    trigger: str = ""


@dataclass
class KnowledgeSource:
    """A frame: named slot tree plus behavioural bindings."""

    appellation: str
    slots: dict = field(default_factory=dict)
    responders: list[ResponderBinding] = field(default_factory=list)
    attractors: list[AttractorBinding] = field(default_factory=list)
    explains: str = ""
    version: int = 1
    owner_cloud: str = ""

    def responder_named(self, name: str) -> Optional[ResponderBinding]:
        for binding in self.responders:
            if binding.name == name:
                return binding
        return None


@dataclass
class Cloud:
    """Named grouping of knowledge sources; clouds nest without cycles."""

    appellation: str
    members: list[str] = field(default_factory=list)
    sub_clouds: list[str] = field(default_factory=list)
    parent: str = ""
    dimension_tags: list[str] = field(default_factory=list)


@dataclass
class Dimension:
    """Named viewpoint: slot assertions that shadow stored values."""

    appellation: str
    assumptions: list[tuple[str, Any]] = field(default_factory=list)
    parent_juncture: str = ""


@dataclass
class Juncture:
    """Decision point grouping alternative dimensions."""

    appellation: str
    dimensions: list[str] = field(default_factory=list)
    lots: list[str] = field(default_factory=list)


@dataclass
class LogEntry:
    """One committed mutation. ``path`` is empty for whole-source re-puts."""

    seq: int
    appellation: str
    version: int
    path: str
    old: Any
    new: Any
    cause: str
    tick: int
    at: str

    def to_json(self, normalize_timestamps: bool = False) -> str:
        record = {
            "seq": self.seq,
            "appellation": self.appellation,
            "version": self.version,
            "path": self.path,
            "old": canonical(self.old),
            "new": canonical(self.new),
            "cause": self.cause,
            "tick": self.tick,
            "at": "" if normalize_timestamps else self.at,
        }
        return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class KnowledgeBase:
    """Container for one logical session's clouds, sources and definitions.

    All mutation funnels through :meth:`put_ks` and :meth:`set_slot`, which
    keep the version log complete.  ``clock`` is a logical tick counter
    advanced by the engines that drive the base; wall timestamps appear only
    in log entries and are normalised away for replay comparison.
    """

    def __init__(self) -> None:
        self.clouds: dict[str, Cloud] = {}
        self.sources: dict[str, KnowledgeSource] = {}
        self.drels: list = []
        self.lots: dict[str, Any] = {}
        self.rule_sets: dict[str, list] = {}
        self.plans: dict[str, Any] = {}
        self.dimensions: dict[str, Dimension] = {}
        self.junctures: dict[str, Juncture] = {}
        self.version_log: list[LogEntry] = []
        self.clock: int = 0

    # -- naming -------------------------------------------------------------

    def _claim_name(self, name: str) -> None:
        check_appellation(name)
        if name in self.clouds or name in self.sources:
            raise AppellationConflict(f"appellation already in use: {name}")

    # -- clouds -------------------------------------------------------------

    def put_cloud(self, appellation: str, parent: str = "",
                  dimension_tags: Iterable[str] = ()) -> Cloud:
        if appellation in self.clouds:
            return self.clouds[appellation]
        self._claim_name(appellation)
        cloud = Cloud(appellation=appellation, dimension_tags=list(dimension_tags))
        self.clouds[appellation] = cloud
        if parent:
            self.add_sub_cloud(parent, appellation)
        return cloud

    def cloud(self, appellation: str) -> Cloud:
        try:
            return self.clouds[appellation]
        except KeyError:
            raise UnknownCloud(f"no cloud named {appellation!r}") from None

    def add_sub_cloud(self, parent: str, child: str) -> None:
        parent_cloud = self.cloud(parent)
        child_cloud = self.cloud(child)
        if child == parent or parent in self._reachable_down(child):
            raise CloudCycle(f"{child} -> {parent} would close a containment cycle")
        if child not in parent_cloud.sub_clouds:
            parent_cloud.sub_clouds.append(child)
        child_cloud.parent = parent

    def _reachable_down(self, start: str) -> set[str]:
        # containment must stay a forest
        seen: set[str] = set()
        stack = [start]
        while stack:
            name = stack.pop()
            if name in seen:
                continue
            seen.add(name)
            stack.extend(self.clouds[name].sub_clouds)
        return seen

    # -- knowledge sources --------------------------------------------------

    def ks(self, appellation: str) -> KnowledgeSource:
        try:
            return self.sources[appellation]
        except KeyError:
            raise UnknownKS(f"no knowledge source named {appellation!r}") from None

    def put_ks(self, cloud_name: str, ks: KnowledgeSource,
               cause: str = "put_ks") -> KnowledgeSource:
        """Insert a source into a cloud, or commit a re-put of an existing one."""
        cloud = self.cloud(cloud_name)
        check_appellation(ks.appellation)
        for value in ks.slots.values():
            check_value(value)
        existing = self.sources.get(ks.appellation)
        if existing is None:
            if ks.appellation in self.clouds:
                raise AppellationConflict(
                    f"appellation already names a cloud: {ks.appellation}")
            ks.owner_cloud = cloud_name
            ks.version = 1
            self.sources[ks.appellation] = ks
            cloud.members.append(ks.appellation)
            return ks
        if existing.owner_cloud != cloud_name:
            raise AppellationConflict(
                f"{ks.appellation} already owned by {existing.owner_cloud}")
        if canonical_json(existing.slots) == canonical_json(ks.slots):
            return existing
        old_slots = existing.slots
        existing.slots = ks.slots
        existing.version += 1
        self._log(existing, "", old_slots, ks.slots, cause)
        return existing

    # -- slots --------------------------------------------------------------

    def get_slot(self, appellation: str, path: "str | Sequence[str]") -> Any:
        return slot_get(self.ks(appellation).slots, split_path(path))

    def set_slot(self, appellation: str, path: "str | Sequence[str]", value: Any,
                 cause: str = "set_slot") -> Optional[LogEntry]:
        """Write one slot, creating intermediate maps as needed.

        Returns the log entry, or None when the write was a no-op.
        """
        ks = self.ks(appellation)
        segments = split_path(path)
        check_value(value)
        node = ks.slots
        for i, seg in enumerate(segments[:-1]):
            if seg not in node:
                node[seg] = {}
            node = node[seg]
            if not isinstance(node, dict):
                raise PathThroughScalar(
                    f"cannot descend into {'/'.join(segments[:i + 1])!r}")
        if not isinstance(node, dict):
            raise PathThroughScalar(f"cannot descend into {'/'.join(segments[:-1])!r}")
        leaf = segments[-1]
        old = node.get(leaf, UNSET)
        if canonical_json(old) == canonical_json(value):
            return None
        node[leaf] = value
        ks.version += 1
        return self._log(ks, "/".join(segments), old, value, cause)

    def _log(self, ks: KnowledgeSource, path: str, old: Any, new: Any,
             cause: str) -> LogEntry:
        entry = LogEntry(
            seq=len(self.version_log),
            appellation=ks.appellation,
            version=ks.version,
            path=path,
            old=copy.deepcopy(old),
            new=copy.deepcopy(new),
            cause=cause,
            tick=self.clock,
            at=_now(),
        )
        self.version_log.append(entry)
        return entry

    # -- digests ------------------------------------------------------------

    def ks_digest(self, appellation: str) -> str:
        payload = canonical_json(self.ks(appellation).slots)
        return hashlib.sha256(payload.encode()).hexdigest()

    def cloud_digest(self, appellation: str) -> str:
        cloud = self.cloud(appellation)
        payload = json.dumps({
            "members": sorted(
                (m, self.sources[m].version) for m in cloud.members),
            "sub_clouds": sorted(cloud.sub_clouds),
            "dimension_tags": sorted(cloud.dimension_tags),
        }, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def digest(self) -> str:
        payload = json.dumps({
            "clouds": sorted(
                (c, self.cloud_digest(c)) for c in self.clouds),
            "sources": sorted(
                (s, self.sources[s].version, self.ks_digest(s))
                for s in self.sources),
        }, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    # -- history ------------------------------------------------------------

    def history(self, appellation: str) -> list[LogEntry]:
        return [e for e in self.version_log if e.appellation == appellation]

    def export_log(self, normalize_timestamps: bool = False) -> str:
        lines = [e.to_json(normalize_timestamps) for e in self.version_log]
        return "\n".join(lines) + ("\n" if lines else "")

    # -- lifecycle ----------------------------------------------------------

    def snapshot(self) -> "KnowledgeBase":
        return copy.deepcopy(self)

    def iter_ks(self) -> Iterator[KnowledgeSource]:
        for name in sorted(self.sources):
            yield self.sources[name]
