"""Pulse dispatch, attractors, responders, anomaly detection."""

import pytest

from keraia import KnowledgeBase, KnowledgeSource
from keraia.errors import CascadeLimitExceeded, TypeMismatch, UnknownResponder
from keraia.events import (
    Impulse,
    Pulse,
    RangeSpec,
    ReadingAnomaly,
    ResponderRegistry,
    detect_anomalies,
    dispatch,
    pulse_from_entry,
    run_responder,
    send_impulse,
)
from keraia.model import AttractorBinding, ResponderBinding


def flow_kb():
    kb = KnowledgeBase()
    kb.put_cloud("Cloud-Intake")
    kb.put_cloud("Cloud-Filtration")
    kb.put_ks("Cloud-Intake", KnowledgeSource(
        "KS-FlowMeter", slots={"reading": 10},
        attractors=[AttractorBinding(condition="new == 0",
                                     responder="flag_pump_blockage")],
        responders=[ResponderBinding(
            name="flag_pump_blockage", op="set_value",
            params={"path": "KS-Pump/status", "value": "suspect-blockage"})]))
    kb.put_ks("Cloud-Filtration", KnowledgeSource(
        "KS-Pump", slots={"status": "ok", "MotorState": "On"}))
    return kb


class TestDispatch:
    def test_zero_flow_pulse_marks_pump_suspect(self):
        """A flow reading dropping to zero flags the upstream pump."""
        kb = flow_kb()
        registry = ResponderRegistry()
        entry = kb.set_slot("KS-FlowMeter", "reading", 0)
        activations = dispatch(kb, registry, [pulse_from_entry(entry)])
        assert activations == 1
        assert kb.get_slot("KS-Pump", "status") == "suspect-blockage"
        causes = [e.cause for e in kb.history("KS-Pump")]
        assert causes == ["responder:flag_pump_blockage"]

    def test_non_matching_pulse_does_nothing(self):
        kb = flow_kb()
        registry = ResponderRegistry()
        entry = kb.set_slot("KS-FlowMeter", "reading", 4)
        assert dispatch(kb, registry, [pulse_from_entry(entry)]) == 0
        assert kb.get_slot("KS-Pump", "status") == "ok"

    def test_watch_on_another_source(self):
        kb = flow_kb()
        kb.ks("KS-Pump").attractors.append(AttractorBinding(
            condition='new == "suspect-blockage"', responder="note",
            watch="KS-Pump/status"))
        kb.ks("KS-Pump").responders.append(ResponderBinding(
            name="note", op="set_value",
            params={"path": "alerts/latest", "value": "blockage-suspected"}))
        registry = ResponderRegistry()
        entry = kb.set_slot("KS-FlowMeter", "reading", 0)
        activations = dispatch(kb, registry, [pulse_from_entry(entry)])
        assert activations == 2
        assert kb.get_slot("KS-Pump", "alerts/latest") == "blockage-suspected"

    def test_cascade_depth_limit(self):
        kb = KnowledgeBase()
        kb.put_cloud("Cloud-X")
        kb.put_ks("Cloud-X", KnowledgeSource(
            "KS-Loop", slots={"n": 0},
            attractors=[AttractorBinding(condition="true", responder="bump")],
            responders=[ResponderBinding(name="bump", op="bump")]))
        registry = ResponderRegistry()

        @registry.register("bump")
        def _bump(ctx):
            ctx.write("n", ctx.read("n") + 1)

        entry = kb.set_slot("KS-Loop", "n", 1)
        with pytest.raises(CascadeLimitExceeded):
            dispatch(kb, registry, [pulse_from_entry(entry)], depth_limit=5)


class TestResponders:
    def test_unknown_operation(self):
        kb = flow_kb()
        with pytest.raises(UnknownResponder):
            run_responder(kb, ResponderRegistry(), "KS-Pump", "no_such_op")

    def test_trigger_condition_gates_binding(self):
        kb = flow_kb()
        kb.ks("KS-Pump").responders.append(ResponderBinding(
            name="guarded", op="set_value",
            params={"path": "status", "value": "tripped"},
            trigger='self.MotorState == "Off"'))
        registry = ResponderRegistry()
        assert run_responder(kb, registry, "KS-Pump", "guarded") == []
        kb.set_slot("KS-Pump", "MotorState", "Off")
        pulses = run_responder(kb, registry, "KS-Pump", "guarded")
        assert len(pulses) == 1
        assert kb.get_slot("KS-Pump", "status") == "tripped"

    def test_impulse_runs_and_cascades(self):
        kb = flow_kb()
        registry = ResponderRegistry()
        kb.ks("KS-FlowMeter").responders.append(ResponderBinding(
            name="reset", op="set_value", params={"path": "reading", "value": 0}))
        activations = send_impulse(kb, registry,
                                   Impulse(target="KS-FlowMeter",
                                           responder="reset"))
        # the reset write pulses the zero-flow attractor
        assert activations == 2
        assert kb.get_slot("KS-Pump", "status") == "suspect-blockage"

    def test_builtin_lookup_and_append(self):
        kb = flow_kb()
        registry = ResponderRegistry()
        kb.ks("KS-Pump").slots["table"] = {"On": "running"}
        kb.ks("KS-Pump").responders.extend([
            ResponderBinding(name="classify", op="derive_lookup",
                             params={"input": "MotorState", "table": "table",
                                     "output": "state_word", "default": "other"}),
            ResponderBinding(name="log_state", op="append_to",
                             params={"path": "state_history",
                                     "from": "state_word"}),
        ])
        run_responder(kb, registry, "KS-Pump", "classify")
        run_responder(kb, registry, "KS-Pump", "log_state")
        run_responder(kb, registry, "KS-Pump", "log_state")
        assert kb.get_slot("KS-Pump", "state_word") == "running"
        assert kb.get_slot("KS-Pump", "state_history") == ["running", "running"]


class TestAnomalies:
    def chlorine_kb(self, value):
        kb = KnowledgeBase()
        kb.put_cloud("Cloud-Disinfection")
        kb.put_ks("Cloud-Disinfection", KnowledgeSource(
            "KS-ChlorineLevel", slots={"reading": value}))
        return kb

    def test_upper_breach(self):
        """Chlorine 1.3 against [0.2, 1.0] reports an upper-bound anomaly."""
        kb = self.chlorine_kb(1.3)
        specs = [RangeSpec("KS-ChlorineLevel", "reading", 0.2, 1.0)]
        assert detect_anomalies(kb, specs) == [
            ReadingAnomaly("KS-ChlorineLevel", "reading", 1.3, "upper", 1.0)]

    def test_bounds_are_inclusive(self):
        """A reading exactly at the limit is not an anomaly."""
        for value in (0.2, 1.0):
            kb = self.chlorine_kb(value)
            specs = [RangeSpec("KS-ChlorineLevel", "reading", 0.2, 1.0)]
            assert detect_anomalies(kb, specs) == []

    def test_lower_breach(self):
        kb = self.chlorine_kb(0.05)
        specs = [RangeSpec("KS-ChlorineLevel", "reading", 0.2, 1.0)]
        assert detect_anomalies(kb, specs)[0].bound == "lower"

    def test_non_numeric_reading_is_hard_error(self):
        kb = self.chlorine_kb("high")
        with pytest.raises(TypeMismatch):
            detect_anomalies(kb, [RangeSpec("KS-ChlorineLevel", "reading",
                                            0.2, 1.0)])
