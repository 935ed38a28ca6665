"""Acceptance gate: eleven timed end-to-end criteria, one verdict line each.

Each test prints `PASS criterion N` (with its runtime) or `FAIL criterion N`;
run with `pytest -s tests/test_acceptance.py` to watch the lines scroll by.
"""

import random
import time
from contextlib import contextmanager

import pytest

from test_ksynth import random_document
from test_rules import atom_rules, naive_closure, random_rule_specs

from keraia.drel import resolve_attribute
from keraia.elaboration import elaborate, standard_functions
from keraia.errors import Unresolvable
from keraia.ksynth import parse, serialize
from keraia.lot import chain_lots, reinforce_kline, run_lot, select_kline
from keraia.packs import load_pack, pack_path
from keraia.risk import (
    AIAssetBot,
    Attack,
    TopicBus,
    simulate_game,
)
from keraia.risk.game import COMMAND_TOPIC
from keraia.rules import Fact, forward_chain
from keraia.trace import ReasoningTrace
from keraia.xai import replay_lot, what_if

PIPELINE = ["LoT-1", "LoT-2", "LoT-3", "LoT-4", "LoT-5", "LoT-6"]

GOLDEN_SEQUENCE = [
    "KS-TR1", "KS-SF1", "KS-SF3",
    "KS-TR2", "KS-SF1", "KS-SF3",
    "KS-SF3", "KS-EC2", "KS-EC3",
    "KS-EC3", "KS-EC1", "KS-FC2",
    "KS-FC2", "KS-FC1", "KS-FC3",
    "KS-FC3", "KS-TR5",
]


@contextmanager
def criterion(number: int, description: str, budget: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\nFAIL criterion {number}: {description}")
        raise
    elapsed = time.perf_counter() - start
    if elapsed >= budget:
        print(f"\nFAIL criterion {number}: {description} "
              f"(overran: {elapsed:.2f}s >= {budget:.0f}s)")
        pytest.fail(f"criterion {number} exceeded its {budget:.0f}s budget "
                    f"({elapsed:.2f}s)")
    print(f"\nPASS criterion {number}: {description} "
          f"({elapsed:.2f}s < {budget:.0f}s)")


def test_criterion_1_conditional_inheritance_toggle():
    """Attribute sharing follows the location slot, checked in both orders."""
    with criterion(1, "conditional inheritance toggles with location, "
                      "both orders", 1.0):
        for first_move in ("airborne-first", "deck-first"):
            kb, _ = load_pack("naval")
            ship_speed = kb.ks("KS-Ship").slots["speed"]
            if first_move == "deck-first":
                value, provenance = resolve_attribute(kb, "KS-Helo",
                                                      ("speed",))
                assert value == ship_speed
                assert provenance.kind == "inherited"
            kb.set_slot("KS-Helo", ("location",), "airborne", cause="launch")
            with pytest.raises(Unresolvable):
                resolve_attribute(kb, "KS-Helo", ("speed",))
            kb.set_slot("KS-Helo", ("location",), "ship", cause="recovery")
            value, provenance = resolve_attribute(kb, "KS-Helo", ("speed",))
            assert value == ship_speed
            assert provenance.kind == "inherited"


def test_criterion_2_fixpoint_oracle_equivalence():
    """Engine closure equals the naive-iteration fixpoint, 50/50 seeds."""
    with criterion(2, "forward chaining matches the naive fixpoint oracle "
                      "on 50 seeded rule sets", 10.0):
        agreements = 0
        for seed in range(50):
            rng = random.Random(seed)
            specs, seeds = random_rule_specs(rng)
            result = forward_chain(None, atom_rules(specs),
                                   extra_facts=[Fact(a) for a in seeds])
            assert not result.capped
            engine_atoms = {f.subject for f in result.wm.facts}
            agreements += engine_atoms == naive_closure(specs, seeds)
        assert agreements == 50


def test_criterion_3_cavitation_truth_table():
    """The two-antecedent rule fires on exactly one of the four rows."""
    with criterion(3, "cavitation diagnosed in exactly 1 of 4 sensor "
                      "truth-table rows", 1.0):
        diagnosis = Fact("KS-Pump", ("diagnosis",), "PumpCavitation")
        hits = []
        for pressure_low in (False, True):
            for current_high in (False, True):
                kb, _ = load_pack("water")
                kb.set_slot("KS-Pump", ("pressure_low",), pressure_low,
                            cause="probe")
                kb.set_slot("KS-Pump", ("motor_current_high",), current_high,
                            cause="probe")
                result = forward_chain(kb, kb.rule_sets["pump-diagnostics"])
                if diagnosis in result.wm.facts:
                    hits.append((pressure_low, current_high))
        assert hits == [(True, True)]


def test_criterion_4_pipeline_golden_trace():
    """Six chained lines of thought activate sources in the golden order."""
    with criterion(4, "surface-track pipeline matches the golden activation "
                      "order, byte-stable", 2.0):
        runs = []
        for _ in range(2):
            kb, registry = load_pack("naval")
            trace = chain_lots(kb, PIPELINE, registry)
            assert trace.activation_sequence() == GOLDEN_SEQUENCE
            runs.append(trace.to_jsonl())
        assert runs[0] == runs[1]


def test_criterion_5_elaboration_pack():
    """The strategic plan derives six sources with exact physics."""
    with criterion(5, "elaboration derives six profile sources with exact "
                      "numbers, inputs untouched", 1.0):
        kb, _ = load_pack("naval")
        before = {name: kb.ks_digest(name)
                  for name in kb.cloud("Situation_Element_Perception_"
                                       "Refinement").members}
        created = elaborate(kb, kb.plans["Plan-Strategic"],
                            standard_functions())
        assert created == [
            "Dimensional_Profiles", "Mass_Profiles", "Capability_Profiles",
            "Operational_Roles", "Predictive_Trajectories",
            "Behavioral_Insights",
        ]
        mass = kb.ks("Mass_Profiles").slots
        assert mass["mass"] == pytest.approx(
            mass["volume"] * mass["density"], rel=1e-9)
        trajectory = kb.ks("Predictive_Trajectories").slots
        assert trajectory["predicted_position"] == [6.5, 2.0]
        after = {name: kb.ks_digest(name) for name in before}
        assert after == before


def test_criterion_6_kline_reinforcement():
    """Ten diagnostic runs weight the read path to exactly 10; argmax is
    invariant under constant weight shifts."""
    with criterion(6, "path weight reaches exactly 10 and argmax selection "
                      "is shift-invariant", 5.0):
        kb, registry = load_pack("water")
        weights: dict = {}
        for _ in range(10):
            trace = ReasoningTrace()
            run_lot(kb, "LoT-HighTurbidityAlarm", registry, trace=trace)
            weights = reinforce_kline(weights, trace)
        assert weights["KS-Filter/status"] == 10
        alternatives = [f"KS-Cold/path-{i}" for i in range(5)]
        assert all(weights.get(a, 0) == 0 for a in alternatives)
        assert select_kline(weights, ["KS-Filter/status"] + alternatives) \
            == "KS-Filter/status"

        rng = random.Random(99)
        for _ in range(1000):
            paths = [f"P{i}" for i in range(rng.randint(2, 8))]
            base = {p: rng.randint(0, 50) for p in paths}
            shift = rng.randint(-20, 20)
            shifted = {p: w + shift for p, w in base.items()}
            assert select_kline(base, paths) == select_kline(shifted, paths)


def test_criterion_7_what_if_null_and_divergence():
    """Empty modifications change nothing; a threat downgrade forks away."""
    with criterion(7, "no-op what-if is trace-identical; threat downgrade "
                      "diverges at the fork", 2.0):
        kb, registry = load_pack("naval")
        chain_lots(kb, PIPELINE[:4], registry)

        null_report = what_if(kb, "LoT-5", [], registry)
        assert not null_report.diverged
        assert null_report.baseline_trace.same_as(null_report.variant_trace)

        report = what_if(kb, "LoT-5",
                         [("KS-FusedEntity/threat", "neutral")], registry)
        assert report.diverged
        base_event, variant_event = report.divergence_events()
        assert base_event["kind"] == "ForkTaken"
        assert variant_event["kind"] == "ForkTaken"
        assert base_event["lot"] == variant_event["lot"] == "LoT-5"
        assert base_event["branch"] == "high-threat"
        assert variant_event["branch"] == "opportunistic"


def test_criterion_8_parser_round_trip():
    """parse(serialize(parse(text))) is the identity on packs and fuzz."""
    with criterion(8, "parse/serialize round trip over 3 packs and 200 "
                      "fuzzed documents", 10.0):
        for name in ("naval", "water", "risk"):
            doc = parse(pack_path(name).read_text())
            text = serialize(doc)
            assert parse(text) == doc
            assert serialize(parse(text)) == text
        for seed in range(200):
            doc = random_document(random.Random(seed))
            text = serialize(doc)
            assert parse(text) == doc
            assert serialize(parse(text)) == text


def test_criterion_9_risk_outcome_direction():
    """The rule-driven seat clearly beats uniform baselines, legally and
    reproducibly."""
    with criterion(9, "rule-driven seat wins >=40% of 200 seeded games with "
                      "legal boards throughout", 60.0):
        bots = ["aiasset", "random", "random", "random"]
        wins = 0
        kept_logs = {}
        for seed in range(200):
            result = simulate_game(bots, seed=seed)
            wins += result.winner == 0
            applied = sum(1 for entry in result.command_log
                          if entry[0] in ("reinforce", "attack", "fortify"))
            assert result.invariant_checks == applied
            result.final_state.check_invariants()
            if seed in (0, 73, 199):
                kept_logs[seed] = result.command_log
        assert wins / 200 >= 0.40, f"win rate {wins / 200:.2f}"

        for seed, log in kept_logs.items():
            again = simulate_game(bots, seed=seed)
            assert again.command_log == log, f"seed {seed} not reproducible"

        for seed in (0, 1, 2):
            bus = TopicBus()
            sent = []
            bus.subscribe(COMMAND_TOPIC, sent.append)
            simulate_game(["aiasset", "benevolent", "random", "random"],
                          seed=seed, bus=bus)
            pacifist_attacks = [m for m in sent
                                if m[0] == 1 and isinstance(m[1], Attack)]
            assert pacifist_attacks == []


def test_criterion_10_strategy_separability():
    """The two attack doctrines do not collapse into one behaviour."""
    with criterion(10, "weakest-first and strongest-first strategies "
                       "separate on 20 common seeds", 10.0):
        differing = 0
        for seed in range(20):
            weakest = simulate_game(
                ["aiasset-weakest", "random", "random", "random"],
                seed=seed, max_turns=12)
            strongest = simulate_game(
                ["aiasset-strongest", "random", "random", "random"],
                seed=seed, max_turns=12)
            differing += weakest.command_log != strongest.command_log
        assert differing >= 1


def test_criterion_11_audit_closure():
    """Across the rule, pipeline, and game runs: every knowledge-base
    mutation is version logged, and stored traces replay byte-for-byte."""
    with criterion(11, "version logs replay to final state; stored traces "
                       "replay byte-for-byte", 30.0):
        # rule run: probe writes land in the log; the chain re-fires alike
        kb, _ = load_pack("water")
        start = kb.snapshot()
        trace = ReasoningTrace()
        kb.set_slot("KS-Pump", ("pressure_low",), True, cause="probe")
        kb.set_slot("KS-Pump", ("motor_current_high",), True, cause="probe")
        forward_chain(kb, kb.rule_sets["pump-diagnostics"], clock=kb.clock,
                      trace=trace)
        replayed = start.snapshot()
        for entry in kb.version_log[len(start.version_log):]:
            replayed.set_slot(entry.appellation, entry.path, entry.new,
                              cause=entry.cause)
        assert replayed.digest() == kb.digest()
        retrace = ReasoningTrace()
        forward_chain(replayed, replayed.rule_sets["pump-diagnostics"],
                      clock=start.clock, trace=retrace)
        assert retrace.to_jsonl() == trace.to_jsonl()

        # pipeline run: full chain replays from its stored snapshot
        kb, registry = load_pack("naval")
        start = kb.snapshot()
        trace = chain_lots(kb, PIPELINE, registry)
        _, replay_bytes = replay_lot(start, PIPELINE, registry)
        assert replay_bytes == trace.to_jsonl(normalize_timestamps=True)
        replayed = start.snapshot()
        for entry in kb.version_log[len(start.version_log):]:
            replayed.set_slot(entry.appellation, entry.path, entry.new,
                              cause=entry.cause)
        assert replayed.digest() == kb.digest()

        # game run: the tactical seat's observations and decisions replay
        seats = ["random", "random", "random"]
        bot = AIAssetBot("audit:acceptance")
        result = simulate_game([bot] + seats, seed=33, max_turns=10)
        assert result.invariant_checks > 0
        replayed = bot.start_snapshot.snapshot()
        for entry in bot.kb.version_log:
            replayed.set_slot(entry.appellation, entry.path, entry.new,
                              cause=entry.cause)
        assert replayed.digest() == bot.kb.digest()
        rerun_bot = AIAssetBot("audit:acceptance")
        simulate_game([rerun_bot] + seats, seed=33, max_turns=10)
        assert rerun_bot.trace.to_jsonl() == bot.trace.to_jsonl()
