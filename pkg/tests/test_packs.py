"""Bundled packs: naval pipeline, water treatment plant, board data."""

from collections import Counter, deque

import pytest

from keraia.drel import resolve_attribute
from keraia.elaboration import elaborate, standard_functions
from keraia.errors import Unresolvable
from keraia.events import RangeSpec, detect_anomalies, dispatch, pulse_from_entry
from keraia.lot import chain_lots, reinforce_kline, run_lot, select_kline
from keraia.packs import PACK_NAMES, load_pack, pack_path
from keraia.paths import resolve_kline
from keraia.rules import Fact, forward_chain
from keraia.trace import ReasoningTrace
from keraia.xai import what_if

PIPELINE = ["LoT-1", "LoT-2", "LoT-3", "LoT-4", "LoT-5", "LoT-6"]

GOLDEN_SEQUENCE = [
    "KS-TR1", "KS-SF1", "KS-SF3",
    "KS-TR2", "KS-SF1", "KS-SF3",
    "KS-SF3", "KS-EC2", "KS-EC3",
    "KS-EC3", "KS-EC1", "KS-FC2",
    "KS-FC2", "KS-FC1", "KS-FC3",
    "KS-FC3", "KS-TR5",
]


class TestPackLoading:
    def test_all_packs_load(self):
        for name in PACK_NAMES:
            kb, registry = load_pack(name)
            assert kb.sources

    def test_unknown_pack_name(self):
        with pytest.raises(FileNotFoundError):
            pack_path("submarine")

    def test_pack_dir_override(self, tmp_path, monkeypatch):
        (tmp_path / "tiny.ksynth").write_text(
            'cloud C { ks K { slot a = 1 } }')
        monkeypatch.setenv("KERAIA_PACK_DIR", str(tmp_path))
        kb, _ = load_pack("tiny")
        assert kb.ks("K").slots == {"a": 1}
        with pytest.raises(FileNotFoundError):
            load_pack("naval")


class TestNavalPipeline:
    def test_golden_activation_sequence(self):
        kb, registry = load_pack("naval")
        trace = chain_lots(kb, PIPELINE, registry)
        assert trace.activation_sequence() == GOLDEN_SEQUENCE

    def test_pipeline_outcome(self):
        kb, registry = load_pack("naval")
        chain_lots(kb, PIPELINE, registry)
        fused = kb.ks("KS-FusedEntity").slots
        assert fused["classification"] == "strike-craft"
        assert fused["intent"] == "hostile"
        assert fused["threat"] == "hostile"
        assert kb.ks("KS-FC3").slots["recommendation"] == "intercept-and-escort"
        display = kb.ks("KS-TR5").slots["display"]
        assert display == {"status": "presented",
                           "recommendation": "intercept-and-escort"}

    def test_trace_is_byte_stable(self):
        first = chain_lots(*self._fresh())
        second = chain_lots(*self._fresh())
        assert first.to_jsonl() == second.to_jsonl()

    @staticmethod
    def _fresh():
        kb, registry = load_pack("naval")
        return kb, PIPELINE, registry

    def test_fork_takes_high_threat_branch(self):
        kb, registry = load_pack("naval")
        trace = chain_lots(kb, PIPELINE, registry)
        forks = [e for e in trace.events if e.kind == "ForkTaken"]
        assert len(forks) == 1
        assert forks[0].data["branch"] == "high-threat"
        assert forks[0].data["untaken"] == ["investigate", "opportunistic"]

    def test_no_errors_in_pipeline(self):
        kb, registry = load_pack("naval")
        trace = chain_lots(kb, PIPELINE, registry)
        assert "Errored" not in trace.kinds()


class TestNavalFork:
    def test_neutral_threat_diverts_to_monitoring(self):
        kb, registry = load_pack("naval")
        chain_lots(kb, PIPELINE[:4], registry)
        report = what_if(kb, "LoT-5",
                         [("KS-FusedEntity/threat", "neutral")], registry)
        assert report.diverged
        base, var = report.divergence_events()
        assert base["kind"] == "ForkTaken" and var["kind"] == "ForkTaken"
        assert base["branch"] == "high-threat"
        assert var["branch"] == "opportunistic"
        variant = report.variant_kb
        assert variant.ks("KS-TR5").slots["display"]["status"] == "monitoring"

    def test_empty_modifications_do_not_diverge(self):
        kb, registry = load_pack("naval")
        chain_lots(kb, PIPELINE[:4], registry)
        report = what_if(kb, "LoT-5", [], registry)
        assert not report.diverged
        assert report.baseline_trace.same_as(report.variant_trace)

    def test_ambiguous_threat_reopens_the_check(self):
        kb, registry = load_pack("naval")
        chain_lots(kb, PIPELINE[:4], registry)
        kb.set_slot("KS-FusedEntity", ("threat",), "ambiguous", cause="test")
        trace = run_lot(kb, "LoT-5", registry)
        forks = [e for e in trace.events if e.kind == "ForkTaken"]
        assert forks[0].data["branch"] == "investigate"
        assert kb.ks("KS-FusedEntity").slots["track"]["quality"] == "under-review"


class TestNavalDrel:
    def test_helo_inherits_ship_speed_on_deck(self):
        kb, _ = load_pack("naval")
        value, prov = resolve_attribute(kb, "KS-Helo", ("speed",))
        assert value == kb.ks("KS-Ship").slots["speed"]
        assert prov.kind == "inherited"
        assert prov.drel == "DRel-HeloDeck"

    def test_inheritance_lapses_when_airborne(self):
        kb, _ = load_pack("naval")
        kb.set_slot("KS-Helo", ("location",), "airborne", cause="launch")
        with pytest.raises(Unresolvable):
            resolve_attribute(kb, "KS-Helo", ("speed",))

    def test_toggle_both_orders(self):
        """Deck -> airborne -> deck and airborne-first both behave."""
        kb, _ = load_pack("naval")
        kb.set_slot("KS-Helo", ("location",), "airborne", cause="launch")
        with pytest.raises(Unresolvable):
            resolve_attribute(kb, "KS-Helo", ("speed",))
        kb.set_slot("KS-Helo", ("location",), "ship", cause="recovery")
        value, _ = resolve_attribute(kb, "KS-Helo", ("speed",))
        assert value.magnitude == 18


class TestNavalDimensions:
    def test_worst_case_shadows_threat(self):
        kb, _ = load_pack("naval")
        dim = kb.dimensions["WorstCaseThreatDim"]
        assert resolve_kline(kb, "KS-FusedEntity/threat", dim) == "hostile"

    def test_sensor_derived_keeps_stored_value(self):
        kb, _ = load_pack("naval")
        dim = kb.dimensions["SensorDerivedDim"]
        assert resolve_kline(kb, "KS-FusedEntity/threat", dim) == "unassessed"

    def test_juncture_links_posture_dimensions(self):
        kb, _ = load_pack("naval")
        junct = kb.junctures["J-ThreatPosture"]
        assert set(junct.dimensions) == {
            "SensorDerivedDim", "WorstCaseThreatDim", "OpportunityAnalysisDim"}
        assert "LoT-5" in junct.lots


class TestNavalElaboration:
    def test_plan_creates_six_analysis_sources(self):
        kb, _ = load_pack("naval")
        created = elaborate(kb, kb.plans["Plan-Strategic"], standard_functions())
        assert created == [
            "Dimensional_Profiles", "Mass_Profiles", "Capability_Profiles",
            "Operational_Roles", "Predictive_Trajectories",
            "Behavioral_Insights"]
        target = kb.cloud("Strategic_Situational_Analysis")
        assert set(target.members) == set(created)

    def test_mass_and_trajectory_hand_values(self):
        """20 m hull: volume 1000, mass 7.85e6; drift shifts track to (6.5, 2)."""
        kb, _ = load_pack("naval")
        elaborate(kb, kb.plans["Plan-Strategic"], standard_functions())
        mass = kb.ks("Mass_Profiles").slots
        assert mass["mass"] == pytest.approx(mass["volume"] * mass["density"],
                                             rel=1e-9)
        assert mass["mass"] == pytest.approx(7.85e6, rel=1e-9)
        traj = kb.ks("Predictive_Trajectories").slots
        assert traj["predicted_position"] == [6.5, 2.0]

    def test_pattern_and_role(self):
        kb, _ = load_pack("naval")
        elaborate(kb, kb.plans["Plan-Strategic"], standard_functions())
        assert kb.ks("Behavioral_Insights").slots["pattern"] == "zigzag"
        assert kb.ks("Operational_Roles").slots == {
            "role": "assault", "basis": "anti-ship-missiles"}

    def test_source_cloud_untouched(self):
        kb, _ = load_pack("naval")
        before = {a: kb.ks_digest(a)
                  for a in kb.cloud("Situation_Element_Perception_Refinement").members}
        elaborate(kb, kb.plans["Plan-Strategic"], standard_functions())
        after = {a: kb.ks_digest(a) for a in before}
        assert after == before


class TestWaterPlant:
    def test_quoted_path_resolves_to_ph(self):
        kb, _ = load_pack("water")
        dim = kb.dimensions["Dim-PumpTripped"]
        path = "WaterTreatmentSystem/WaterQuality/pH/CurrentValue"
        assert resolve_kline(kb, path, dim) == 7.2

    def test_storm_dimension_shadows_ph(self):
        kb, _ = load_pack("water")
        dim = kb.dimensions["Dim-StormIntake"]
        path = "WaterTreatmentSystem/WaterQuality/pH/CurrentValue"
        assert resolve_kline(kb, path, dim) == 9.1

    def test_pump_profile(self):
        kb, _ = load_pack("water")
        pump = kb.ks("KS-Pump").slots
        assert pump["MotorState"] == "On"
        assert pump["BearingTemperature"] == 78.5
        assert pump["VibrationLevel"] == 2.4
        assert pump["EfficiencyCurve"] == {"flow_lpm": 450, "head_m": 32}

    def test_valve_inherits_motor_state_while_auto(self):
        kb, _ = load_pack("water")
        value, prov = resolve_attribute(kb, "KS-Valve", ("MotorState",))
        assert value == "On" and prov.kind == "inherited"
        kb.set_slot("KS-Valve", ("mode",), "manual", cause="operator")
        with pytest.raises(Unresolvable):
            resolve_attribute(kb, "KS-Valve", ("MotorState",))

    def test_flow_stoppage_flags_the_pump(self):
        kb, registry = load_pack("water")
        entry = kb.set_slot("KS-FlowMeter", ("flow_lps",), 0, cause="sensor")
        dispatch(kb, registry, [pulse_from_entry(entry)])
        assert kb.ks("KS-Pump").slots["status"] == "suspect-blockage"

    def test_normal_flow_change_is_ignored(self):
        kb, registry = load_pack("water")
        entry = kb.set_slot("KS-FlowMeter", ("flow_lps",), 95, cause="sensor")
        dispatch(kb, registry, [pulse_from_entry(entry)])
        assert kb.ks("KS-Pump").slots["status"] == "normal"

    def test_reading_anomaly_bounds(self):
        kb, _ = load_pack("water")
        specs = [RangeSpec("KS-ChlorineLevel", "residual_mg_per_l", 0.2, 1.5),
                 RangeSpec("KS-PressureSensor", "pressure_bar", 1.5, 3.0)]
        assert detect_anomalies(kb, specs) == []
        kb.set_slot("KS-ChlorineLevel", ("residual_mg_per_l",), 0.05,
                    cause="sensor")
        found = detect_anomalies(kb, specs)
        assert [(a.ks, a.bound) for a in found] == [
            ("KS-ChlorineLevel", "lower")]


class TestCavitationRule:
    def test_exactly_one_truth_table_row_diagnoses(self):
        kb, _ = load_pack("water")
        diagnosis = Fact("KS-Pump", ("diagnosis",), "PumpCavitation")
        hits = []
        for pressure_low in (False, True):
            for current_high in (False, True):
                kb.set_slot("KS-Pump", ("pressure_low",), pressure_low,
                            cause="test")
                kb.set_slot("KS-Pump", ("motor_current_high",), current_high,
                            cause="test")
                result = forward_chain(kb, kb.rule_sets["pump-diagnostics"])
                if diagnosis in result.wm.facts:
                    hits.append((pressure_low, current_high))
        assert hits == [(True, True)]

    def test_bearing_wear_stays_quiet_at_nominal_readings(self):
        kb, _ = load_pack("water")
        kb.set_slot("KS-Pump", ("pressure_low",), True, cause="test")
        kb.set_slot("KS-Pump", ("motor_current_high",), True, cause="test")
        result = forward_chain(kb, kb.rule_sets["pump-diagnostics"])
        assert [name for name, _ in result.fired] == ["cavitation"]


class TestTurbidityAlarm:
    def test_alarm_walk_gathers_findings(self):
        kb, registry = load_pack("water")
        trace = run_lot(kb, "LoT-HighTurbidityAlarm", registry)
        assert "Errored" not in trace.kinds()
        sensor = kb.ks("KS-TurbiditySensor").slots
        assert sensor["alarm_state"] == "active"
        assert sensor["findings"] == {"filter_status": "clogged",
                                      "backwash_age_hours": 31,
                                      "intake_pH": 7.2}
        assert sensor["diagnosis"] == "filter-clog"
        assert kb.ks("KS-Chlorinator").slots["dosing_review"] == "adequate"

    def test_ten_runs_weight_the_filter_path(self):
        kb, registry = load_pack("water")
        weights: dict = {}
        for _ in range(10):
            trace = ReasoningTrace()
            run_lot(kb, "LoT-HighTurbidityAlarm", registry, trace=trace)
            weights = reinforce_kline(weights, trace)
        assert weights["KS-Filter/status"] == 10
        assert select_kline(weights, ["KS-Pump/status", "KS-Filter/status",
                                      "KS-Valve/position"]) == "KS-Filter/status"


class TestRiskBoard:
    @staticmethod
    def _territories(kb):
        return {a: ks for a, ks in kb.sources.items()
                if not a.startswith("Continent-")}

    def test_forty_two_territories_six_continents(self):
        kb, _ = load_pack("risk")
        territories = self._territories(kb)
        assert len(territories) == 42
        counts = Counter(ks.slots["continent"] for ks in territories.values())
        assert counts == {"North_America": 9, "South_America": 4, "Europe": 7,
                          "Africa": 6, "Asia": 12, "Australia": 4}
        bonuses = {a: kb.ks(a).slots["bonus"] for a in kb.sources
                   if a.startswith("Continent-")}
        assert bonuses == {
            "Continent-North_America": 5, "Continent-South_America": 2,
            "Continent-Europe": 5, "Continent-Africa": 3,
            "Continent-Asia": 7, "Continent-Australia": 2}

    def test_adjacency_symmetric_and_connected(self):
        kb, _ = load_pack("risk")
        territories = self._territories(kb)
        for name, ks in territories.items():
            for neighbor in ks.slots["neighbors"]:
                assert name in territories[neighbor].slots["neighbors"]
        seen, queue = {"Alaska"}, deque(["Alaska"])
        while queue:
            for n in territories[queue.popleft()].slots["neighbors"]:
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        assert len(seen) == 42

    def test_signature_sea_crossings_present(self):
        kb, _ = load_pack("risk")
        links = {("Alaska", "Kamchatka"), ("Brazil", "North_Africa"),
                 ("Siam", "Indonesia"), ("East_Africa", "Middle_East")}
        for a, b in links:
            assert b in kb.ks(a).slots["neighbors"]
