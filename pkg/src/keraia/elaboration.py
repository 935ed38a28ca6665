"""Cloud elaboration: derive a new cloud of knowledge sources by applying
typed transformation functions to sources of an existing cloud.

A transformation declares the slot paths it reads; the run verifies the body
stayed inside that declaration, logs every application as a FunctionLogged
event, and leaves the source cloud's digest untouched.  All scenario
constants (ratios, densities, lookup tables, thresholds) live in fixture
slots, never in the function bodies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import (
    MissingInput,
    OutputCollision,
    UnknownTransformation,
    Unresolvable,
    UnknownSegment,
)
from .model import KnowledgeBase, KnowledgeSource, slot_get
from .paths import kline_of, locate
from .trace import ReasoningTrace

CATEGORIES = (
    "Augmentation",
    "Calculation",
    "Inference",
    "Classification",
    "Prediction",
    "PatternRecognition",
)


@dataclass
class TransformationFn:
    """One declared derivation from a source's slots to a new source."""

    name: str
    category: str
    inputs: list                    # slot paths, relative to the source or absolute
    output_ks: str
    body: Callable                  # body(FnContext) -> dict of output slots

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise UnknownTransformation(
                f"{self.name}: unknown category {self.category!r}")


@dataclass
class ElaborationPlan:
    name: str
    source_cloud: str
    target_cloud: str
    pairs: list = field(default_factory=list)   # (source ks, function name)


class FnContext:
    """Read access for a transformation body, with read accounting."""

    def __init__(self, kb: KnowledgeBase, source: str) -> None:
        self.kb = kb
        self.source = source
        self.reads: list[str] = []

    def _address(self, path: str) -> tuple[str, tuple]:
        head = path.split("/", 1)[0]
        if head in self.kb.sources or head in self.kb.clouds:
            return locate(self.kb, path)
        return self.source, tuple(path.split("/"))

    def read(self, path: str) -> Any:
        ks, slots = self._address(path)
        try:
            value = slot_get(self.kb.ks(ks).slots, slots)
        except Unresolvable:
            raise MissingInput(
                f"input {kline_of(ks, slots)!r} is absent") from None
        self.reads.append(kline_of(ks, slots))
        return value


def _declared_addresses(kb: KnowledgeBase, source: str,
                        declared: list) -> set[str]:
    out = set()
    for path in declared:
        head = path.split("/", 1)[0]
        if head in kb.sources or head in kb.clouds:
            try:
                ks, slots = locate(kb, path)
            except UnknownSegment:
                raise MissingInput(f"declared input {path!r} does not resolve") \
                    from None
        else:
            ks, slots = source, tuple(path.split("/"))
        out.add(kline_of(ks, slots))
    return out


def elaborate(kb: KnowledgeBase, plan: ElaborationPlan,
              functions: dict,
              trace: Optional[ReasoningTrace] = None) -> list[str]:
    """Apply a plan; returns the appellations created, in creation order."""
    kb.cloud(plan.source_cloud)
    created: list[str] = []
    if plan.target_cloud not in kb.clouds:
        kb.put_cloud(plan.target_cloud)
    for source_name, fn_name in plan.pairs:
        fn = functions.get(fn_name)
        if fn is None:
            raise UnknownTransformation(f"no transformation named {fn_name!r}")
        kb.ks(source_name)
        allowed = _declared_addresses(kb, source_name, fn.inputs)
        ctx = FnContext(kb, source_name)
        kb.clock += 1
        produced = fn.body(ctx)
        note = ""
        if isinstance(produced, tuple):
            slots, note = produced
        else:
            slots = produced
        stray = [r for r in ctx.reads if r not in allowed]
        if stray:
            raise MissingInput(
                f"{fn.name} read undeclared inputs: {sorted(set(stray))}")
        output_name = fn.output_ks
        if output_name in kb.sources or output_name in kb.clouds:
            raise OutputCollision(f"output appellation {output_name!r} taken")
        explains = (f"{output_name}: derived by {fn.name} ({fn.category}) "
                    f"from {', '.join(fn.inputs)}")
        if note:
            explains += f" ({note})"
        kb.put_ks(plan.target_cloud, KnowledgeSource(
            output_name, slots=slots, explains=explains))
        created.append(output_name)
        if trace is not None:
            trace.function_logged(kb.clock, fn.name, fn.category, source_name,
                                  output_name, ctx.reads,
                                  [f"{output_name}/{k}" for k in slots])
    return created


# --- the six analysis transformations --------------------------------------

def _dimension_mapping(ctx: FnContext) -> dict:
    length = ctx.read("size/overall_length")
    width = length * ctx.read("assumptions/width_ratio")
    height = length * ctx.read("assumptions/height_ratio")
    return {"length": length, "width": width, "height": height,
            "volume": length * width * height}


def _mass_estimation(ctx: FnContext) -> dict:
    volume = ctx.read("Dimensional_Profiles/volume")
    density = ctx.read("assumptions/density")
    return {"volume": volume, "density": density, "mass": volume * density}


def _capability_inference(ctx: FnContext):
    klass = ctx.read("identity/class")
    table = ctx.read("KS-PlatformCatalog/classes")
    if klass not in table:
        return {"class": klass, "capabilities": []}, "unknown class"
    return {"class": klass, "capabilities": list(table[klass])}


def _role_identification(ctx: FnContext) -> dict:
    capabilities = ctx.read("Capability_Profiles/capabilities")
    doctrine = ctx.read("KS-RoleDoctrine/role_rules")
    for entry in doctrine:
        if entry["requires"] in capabilities:
            return {"role": entry["role"], "basis": entry["requires"]}
    return {"role": ctx.read("KS-RoleDoctrine/default_role"), "basis": "default"}


def _trajectory_modeling(ctx: FnContext) -> dict:
    pos = ctx.read("kinematics/position")
    vel = ctx.read("kinematics/velocity")
    horizon = ctx.read("kinematics/horizon_ticks")
    drift = ctx.read("KS-SeaState/drift")
    predicted = [p + v * horizon + d for p, v, d in zip(pos, vel, drift)]
    return {"position": list(pos), "predicted_position": predicted,
            "horizon_ticks": horizon}


def _pattern_recognition(ctx: FnContext) -> dict:
    history = ctx.read("kinematics/heading_history")
    thresholds = ctx.read("KS-PatternCatalog/thresholds")
    deltas = [b - a for a, b in zip(history, history[1:])]
    max_change = max((abs(d) for d in deltas), default=0)
    net_change = sum(deltas)
    steady = bool(deltas) and (all(d >= 0 for d in deltas)
                               or all(d <= 0 for d in deltas))
    if max_change <= thresholds["straight_max_delta"]:
        pattern = "straight-run"
    elif _alternations(deltas, thresholds["zigzag_min_delta"]) >= 2:
        pattern = "zigzag"
    elif steady and abs(net_change) >= thresholds["closing_min_total"]:
        pattern = "closing-course"
    else:
        pattern = "irregular"
    return {"pattern": pattern, "max_heading_change": max_change,
            "net_heading_change": net_change}


def _alternations(deltas: list, min_delta: float) -> int:
    strong = [d for d in deltas if abs(d) >= min_delta]
    return sum(1 for a, b in zip(strong, strong[1:]) if (a > 0) != (b > 0))


def standard_functions() -> dict:
    """The six analysis functions keyed by name."""
    fns = [
        TransformationFn(
            name="Detailed_Dimension_Mapping", category="Augmentation",
            inputs=["size/overall_length", "assumptions/width_ratio",
                    "assumptions/height_ratio"],
            output_ks="Dimensional_Profiles", body=_dimension_mapping),
        TransformationFn(
            name="Mass_Estimation", category="Calculation",
            inputs=["Dimensional_Profiles/volume", "assumptions/density"],
            output_ks="Mass_Profiles", body=_mass_estimation),
        TransformationFn(
            name="Capability_Inference", category="Inference",
            inputs=["identity/class", "KS-PlatformCatalog/classes"],
            output_ks="Capability_Profiles", body=_capability_inference),
        TransformationFn(
            name="Operational_Role_Identification", category="Classification",
            inputs=["Capability_Profiles/capabilities", "KS-RoleDoctrine/role_rules",
                    "KS-RoleDoctrine/default_role"],
            output_ks="Operational_Roles", body=_role_identification),
        TransformationFn(
            name="Predictive_Trajectory_Modeling", category="Prediction",
            inputs=["kinematics/position", "kinematics/velocity",
                    "kinematics/horizon_ticks", "KS-SeaState/drift"],
            output_ks="Predictive_Trajectories", body=_trajectory_modeling),
        TransformationFn(
            name="Behavioral_Pattern_Recognition", category="PatternRecognition",
            inputs=["kinematics/heading_history", "KS-PatternCatalog/thresholds"],
            output_ks="Behavioral_Insights", body=_pattern_recognition),
    ]
    return {fn.name: fn for fn in fns}
