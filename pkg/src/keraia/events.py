"""Pulses, impulses, responder dispatch and reading anomaly detection.

A pulse is a notification of one committed slot mutation.  Dispatch walks
pending pulses breadth-first: for each pulse every watching attractor is
evaluated in deterministic order (owner appellation, then attractor index)
and a satisfied attractor invokes its responder, whose own writes queue
follow-up pulses one cascade level deeper.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from .conditions import Env, eval_condition
from .errors import (
    CascadeLimitExceeded,
    MissingInput,
    TypeMismatch,
    UnknownResponder,
    Unresolvable,
)
from .model import KnowledgeBase, LogEntry, Quantity, slot_get
from .paths import kline_of, locate
from .trace import ReasoningTrace


@dataclass(frozen=True)
class Pulse:
    """State-change notification for one committed mutation."""

    source: str
    path: str
    old: Any
    new: Any
    tick: int
    cause: str = ""


@dataclass(frozen=True)
class Impulse:
    """Direct activation request for one responder on one source."""

    target: str
    responder: str
    payload: tuple = ()


def pulse_from_entry(entry: LogEntry) -> Pulse:
    return Pulse(source=entry.appellation, path=entry.path, old=entry.old,
                 new=entry.new, tick=entry.tick, cause=entry.cause)


class ResponderRegistry:
    """Named operations a responder binding can point at."""

    def __init__(self, with_builtins: bool = True) -> None:
        self._ops: dict[str, Callable] = {}
        if with_builtins:
            register_builtins(self)

    def register(self, name: str, fn: Optional[Callable] = None):
        if fn is None:
            def decorator(f: Callable) -> Callable:
                self._ops[name] = f
                return f
            return decorator
        self._ops[name] = fn
        return fn

    def op(self, name: str) -> Callable:
        try:
            return self._ops[name]
        except KeyError:
            raise UnknownResponder(f"no responder operation {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._ops)

    def __contains__(self, name: str) -> bool:
        return name in self._ops


@dataclass
class ResponderContext:
    """What a responder operation sees while it runs."""

    kb: KnowledgeBase
    ks: str
    cause: str
    params: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    pulse: Optional[Pulse] = None
    trace: Optional[ReasoningTrace] = None
    pulses: list = field(default_factory=list)

    @property
    def tick(self) -> int:
        return self.kb.clock

    def _address(self, path: str) -> tuple[str, tuple]:
        head = path.split("/", 1)[0]
        if "/" in path and (head in self.kb.sources or head in self.kb.clouds):
            return locate(self.kb, path)
        return self.ks, tuple(path.split("/"))

    def read(self, path: str, default: Any = ...) -> Any:
        ks, slots = self._address(path)
        try:
            return slot_get(self.kb.ks(ks).slots, slots)
        except Unresolvable:
            if default is ...:
                raise
            return default

    def write(self, path: str, value: Any) -> None:
        ks, slots = self._address(path)
        entry = self.kb.set_slot(ks, slots, value, cause=self.cause)
        if entry is not None:
            pulse = pulse_from_entry(entry)
            self.pulses.append(pulse)
            if self.trace is not None:
                self.trace.pulse_emitted(entry.tick, pulse.source, pulse.path,
                                         pulse.old, pulse.new, pulse.cause)


def run_responder(kb: KnowledgeBase, registry: ResponderRegistry, ks: str,
                  name: str, inputs: Optional[dict] = None,
                  pulse: Optional[Pulse] = None,
                  trace: Optional[ReasoningTrace] = None) -> list[Pulse]:
    """Run a named responder binding (or a bare registry operation) on a source."""
    source = kb.ks(ks)
    binding = source.responder_named(name)
    if binding is not None:
        if binding.trigger:
            env = Env(kb=kb, roles={"self": ks}, clock=kb.clock)
            if not eval_condition(binding.trigger, env):
                return []
        op, params = registry.op(binding.op), binding.params
    else:
        op, params = registry.op(name), {}
    ctx = ResponderContext(kb=kb, ks=ks, cause=f"responder:{name}",
                           params=dict(params), inputs=dict(inputs or {}),
                           pulse=pulse, trace=trace)
    op(ctx)
    return ctx.pulses


def dispatch(kb: KnowledgeBase, registry: ResponderRegistry,
             pulses: Iterable[Pulse], depth_limit: int = 8,
             trace: Optional[ReasoningTrace] = None) -> int:
    """Deliver pulses to watching attractors, cascading breadth-first.

    Returns the number of responder activations.  Going past ``depth_limit``
    cascade levels raises CascadeLimitExceeded.
    """
    queue: deque[tuple[Pulse, int]] = deque((p, 0) for p in pulses)
    activations = 0
    while queue:
        pulse, depth = queue.popleft()
        if depth > depth_limit:
            raise CascadeLimitExceeded(
                f"pulse cascade exceeded depth {depth_limit}")
        for owner in sorted(kb.sources):
            source = kb.sources[owner]
            for index, attractor in enumerate(source.attractors):
                if not _watches(attractor.watch, owner, pulse):
                    continue
                env = Env(kb=kb, roles={"self": owner, "source": pulse.source},
                          vars={"new": pulse.new, "old": pulse.old,
                                "path": pulse.path},
                          clock=kb.clock)
                if not eval_condition(attractor.condition, env):
                    continue
                follow = run_responder(kb, registry, owner, attractor.responder,
                                       pulse=pulse, trace=trace)
                activations += 1
                queue.extend((p, depth + 1) for p in follow)
    return activations


def _watches(watch: str, owner: str, pulse: Pulse) -> bool:
    if not watch:
        return pulse.source == owner
    target, _, path = watch.partition("/")
    if pulse.source != target:
        return False
    return not path or pulse.path == path


def send_impulse(kb: KnowledgeBase, registry: ResponderRegistry,
                 impulse: Impulse, depth_limit: int = 8,
                 trace: Optional[ReasoningTrace] = None) -> int:
    """Activate one responder directly, then cascade its pulses."""
    follow = run_responder(kb, registry, impulse.target, impulse.responder,
                           inputs=dict(impulse.payload), trace=trace)
    return 1 + dispatch(kb, registry, follow, depth_limit=depth_limit,
                        trace=trace)


# --- anomaly detection -----------------------------------------------------

@dataclass(frozen=True)
class RangeSpec:
    """Inclusive expected range for one numeric reading."""

    ks: str
    path: str
    low: float
    high: float


@dataclass(frozen=True)
class ReadingAnomaly:
    ks: str
    path: str
    value: float
    bound: str          # "lower" or "upper"
    limit: float


def detect_anomalies(kb: KnowledgeBase,
                     specs: Iterable[RangeSpec]) -> list[ReadingAnomaly]:
    """Compare readings with inclusive expected ranges; breaches in order."""
    found: list[ReadingAnomaly] = []
    for spec in specs:
        value = slot_get(kb.ks(spec.ks).slots, tuple(spec.path.split("/")))
        if isinstance(value, Quantity):
            value = value.magnitude
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(
                f"range spec on {kline_of(spec.ks, tuple(spec.path.split('/')))} "
                f"needs a number, got {type(value).__name__}")
        if value < spec.low:
            found.append(ReadingAnomaly(spec.ks, spec.path, value, "lower",
                                        spec.low))
        elif value > spec.high:
            found.append(ReadingAnomaly(spec.ks, spec.path, value, "upper",
                                        spec.high))
    return found


# --- generic responder operations -----------------------------------------

def register_builtins(registry: ResponderRegistry) -> None:
    """Data-driven operations the scenario packs configure via parameters."""

    @registry.register("noop")
    def _noop(ctx: ResponderContext) -> None:
        pass

    @registry.register("set_value")
    def _set_value(ctx: ResponderContext) -> None:
        ctx.write(ctx.params["path"], ctx.params["value"])

    @registry.register("record_tick")
    def _record_tick(ctx: ResponderContext) -> None:
        ctx.write(ctx.params.get("path", "last_activated"), ctx.tick)

    @registry.register("copy_slot")
    def _copy_slot(ctx: ResponderContext) -> None:
        if "default" in ctx.params:
            value = ctx.read(ctx.params["from"], ctx.params["default"])
        else:
            value = ctx.read(ctx.params["from"])
        ctx.write(ctx.params["to"], value)

    @registry.register("copy_slots")
    def _copy_slots(ctx: ResponderContext) -> None:
        for move in ctx.params["moves"]:
            value = ctx.read(move["from"])
            ctx.write(move["to"], value)

    @registry.register("derive_lookup")
    def _derive_lookup(ctx: ResponderContext) -> None:
        key = ctx.read(ctx.params["input"])
        table = ctx.read(ctx.params["table"])
        if not isinstance(table, dict):
            raise MissingInput(
                f"lookup table {ctx.params['table']!r} is not a map")
        if not isinstance(key, str):
            raise TypeMismatch(f"lookup key must be a string, got {key!r}")
        if key in table:
            ctx.write(ctx.params["output"], table[key])
        elif "default" in ctx.params:
            ctx.write(ctx.params["output"], ctx.params["default"])
        else:
            raise MissingInput(f"no entry for {key!r} in {ctx.params['table']!r}")

    @registry.register("append_to")
    def _append_to(ctx: ResponderContext) -> None:
        value = ctx.read(ctx.params["from"]) if "from" in ctx.params \
            else ctx.params["value"]
        existing = ctx.read(ctx.params["path"], [])
        if not isinstance(existing, list):
            raise TypeMismatch(f"{ctx.params['path']!r} is not a list")
        ctx.write(ctx.params["path"], existing + [value])
