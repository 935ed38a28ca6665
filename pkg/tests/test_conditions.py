"""Condition language: comparisons, short-circuit logic, builtins, typing."""

import pytest

from keraia import KnowledgeBase, KnowledgeSource, Quantity
from keraia.conditions import Env, eval_condition, eval_expression
from keraia.errors import (
    ConditionSyntaxError,
    TypeMismatch,
    UnknownPathInCondition,
)


def nav_kb():
    kb = KnowledgeBase()
    kb.put_cloud("Cloud-FC")
    kb.put_ks("Cloud-FC", KnowledgeSource("KS-Ship", slots={
        "speed": Quantity(18, "knots"), "pos": [0, 0], "last_update": 7}))
    kb.put_ks("Cloud-FC", KnowledgeSource("KS-Helo", slots={
        "location": "KS-Ship", "pos": [3, 4]}))
    return kb


def env(**kw):
    defaults = dict(kb=nav_kb(), roles={"source": "KS-Ship", "target": "KS-Helo"})
    defaults.update(kw)
    return Env(**defaults)


class TestBasics:
    def test_literals_and_comparisons(self):
        e = Env()
        assert eval_condition("1 < 2", e)
        assert eval_condition('"a" == "a"', e)
        assert not eval_condition("true == false", e)
        assert eval_condition("2 >= 2 and 3 != 4", e)

    def test_arithmetic_in_guards(self):
        e = Env(vars={"a1": 5, "min_enemy": 2})
        assert eval_condition("a1 > min_enemy + 1", e)
        assert not eval_condition("a1 > min_enemy * 3", e)

    def test_parenthesised_grouping(self):
        e = Env()
        assert eval_condition("(1 < 2 or 2 < 1) and not false", e)

    def test_trailing_tokens_rejected(self):
        with pytest.raises(ConditionSyntaxError):
            eval_condition("1 < 2 extra", Env())


class TestTyping:
    def test_number_vs_string_is_hard_error(self):
        with pytest.raises(TypeMismatch):
            eval_condition('1 < "two"', Env())
        with pytest.raises(TypeMismatch):
            eval_condition('1 == "1"', Env())

    def test_logic_needs_booleans(self):
        with pytest.raises(TypeMismatch):
            eval_condition("1 and true", Env())
        with pytest.raises(TypeMismatch):
            eval_condition("not 3", Env())

    def test_short_circuit_skips_bad_right_side(self):
        """'false and X' never evaluates X, so no TypeMismatch surfaces."""
        assert not eval_condition('false and (1 < "two")', Env())
        assert eval_condition('true or (1 < "two")', Env())


class TestReferences:
    def test_role_slot_access(self):
        assert eval_condition("source.speed == 18", env())

    def test_appellation_pseudo_slot(self):
        assert eval_condition("target.location == source.appellation", env())

    def test_bare_role_yields_appellation(self):
        assert eval_condition("target.location == source", env())

    def test_absolute_path(self):
        assert eval_condition("KS-Ship/speed > 10", env())

    def test_unknown_path_is_an_error(self):
        with pytest.raises(UnknownPathInCondition):
            eval_condition("source.no_such_slot == 1", env())
        with pytest.raises(UnknownPathInCondition):
            eval_condition("mystery == 1", env())

    def test_reads_are_logged(self):
        reads = set()
        e = env(reads=reads)
        eval_condition("source.speed > 1 and target.location == source.appellation", e)
        assert reads == {"KS-Ship/speed", "KS-Helo/location"}


class TestBuiltins:
    def test_distance_euclidean(self):
        """distance((0,0),(3,4)) is 5, inside a 10-unit gate."""
        assert eval_expression("distance(source.pos, target.pos)", env()) == 5.0
        assert eval_condition("distance(source.pos, target.pos) < 10", env())

    def test_elapsed_since_logical_clock(self):
        e = env(clock=12)
        assert eval_expression("elapsed_since(source.last_update)", e) == 5
        assert eval_condition("elapsed_since(source.last_update) < 6", e)

    def test_exists(self):
        assert eval_condition("exists(source.speed)", env())
        assert not eval_condition("exists(source.missing)", env())
        assert eval_condition("exists(KS-Helo/pos) and not exists(KS-Helo/speed)",
                              env())

    def test_distance_type_checks(self):
        with pytest.raises(TypeMismatch):
            eval_expression("distance(source.speed, target.pos)", env())
