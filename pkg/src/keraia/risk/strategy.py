"""Tactical analysis for the board game: threat table, facts, rule packs.

The rule-driven bot reasons in three phase-partitioned rule sets.  Before
each decision the current game state is condensed into a threat table, the
table is projected into working-memory facts, and the active phase's rules
pick one command.  Amount arithmetic the rule language cannot express
(reinforcement shortfalls, dice counts) lives in two small calculators.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import UnknownPlayer
from ..rules import Aggregate, Emit, Fact, Pattern, Rule, Var
from .game import Attack, Fortify, GameState, Reinforce


@dataclass(frozen=True)
class ThreatRow:
    territory: str
    armies: int
    neighbors: tuple            # (name, owner, armies) sorted by name
    is_continent_border: bool


@dataclass(frozen=True)
class ThreatTable:
    player: int
    rows: tuple

    def row(self, territory: str) -> ThreatRow:
        for row in self.rows:
            if row.territory == territory:
                return row
        raise KeyError(territory)


def build_threat_table(state: GameState, player: int) -> ThreatTable:
    """Per-territory tactical view for one player, rows in name order."""
    if not 0 <= player < len(state.active):
        raise UnknownPlayer(f"no player {player} in this game")
    rows = []
    for territory in state.owned(player):
        home = state.board.continent_of(territory)
        neighbors = tuple(
            (name, state.owner[name], state.armies[name])
            for name in sorted(state.board.neighbors(territory)))
        foreign = any(state.board.continent_of(name) != home
                      for name, _, _ in neighbors)
        rows.append(ThreatRow(territory, state.armies[territory],
                              neighbors, foreign))
    return ThreatTable(player, tuple(rows))


def calculate_dice(armies: int) -> int:
    return min(3, armies - 1)


def calculate_needed(armies: int, target: int = 5) -> int:
    return max(0, target - armies)


def threat_facts(state: GameState, player: int,
                 phase: str = "") -> list:
    """Working-memory projection of the threat table.

    The projection is frontier-restricted: adjacency and enemy strength are
    emitted only for hostile borders, which is all the rule packs consult.
    Role markers keyed by the constant ("mine", "border", "interior") serve
    as join entry points; the same properties keyed by territory serve the
    later, already-bound lookups.  Passing a phase name keeps only the facts
    that phase's rules read; the default keeps everything.
    """
    table = build_threat_table(state, player)
    want = _PHASE_FACTS.get(phase, _ALL_FACTS)
    facts = []
    border = []
    for row in table.rows:
        if "mine" in want:
            facts.append(Fact("mine", (row.territory,), True))
        hostile = any(owner != player for _, owner, _ in row.neighbors)
        if hostile:
            border.append(row.territory)
        if "armies" in want:
            facts.append(Fact(row.territory, ("armies",), row.armies))
        if hostile:
            if "frontier" in want:
                for name, owner, armies in row.neighbors:
                    if owner != player:
                        facts.append(Fact(row.territory, ("adjacent", name),
                                          True))
                        facts.append(Fact(name, ("enemy",), True))
                        facts.append(Fact(name, ("armies",), armies))
            if "border" in want:
                facts.append(Fact("border", (row.territory,), True))
                facts.append(Fact(row.territory, ("border",), True))
        elif "interior" in want:
            facts.append(Fact("interior", (row.territory,), True))
    if "connected" in want:
        facts.extend(_connection_facts(state, player, table, border))
    if "continents" in want:
        for continent in state.continents_owned(player):
            facts.append(Fact("continent-owned", (continent,), True))
    return facts


_ALL_FACTS = frozenset(
    ["mine", "armies", "frontier", "border", "interior", "connected",
     "continents"])
_PHASE_FACTS = {
    "Reinforce": frozenset(["mine", "armies", "border", "continents"]),
    "Attack": frozenset(["armies", "frontier", "border"]),
    "Fortify": frozenset(["armies", "border", "interior", "connected"]),
}


def _connection_facts(state: GameState, player: int, table: ThreatTable,
                      border: list) -> list:
    """connected(interior, border) for pairs inside one friendly component."""
    component: dict[str, int] = {}
    for row in table.rows:
        if row.territory in component:
            continue
        label = len(component)
        frontier = [row.territory]
        component[row.territory] = label
        while frontier:
            for name in state.board.neighbors(frontier.pop()):
                if state.owner.get(name) == player and name not in component:
                    component[name] = label
                    frontier.append(name)
    facts = []
    for row in table.rows:
        if row.territory in border:
            continue
        for target in border:
            if component[target] == component[row.territory]:
                facts.append(Fact(row.territory, ("connected", target), True))
    return facts


def risk_rule_packs(strategy: str = "weakest") -> dict:
    """Phase-partitioned rule sets; ``strategy`` picks the attack stance."""
    if strategy not in ("weakest", "strongest"):
        raise ValueError(f"unknown attack strategy {strategy!r}")
    reinforce = [
        Rule(
            name="reinforce-continent-security",
            rule_set="risk-reinforce",
            salience=10,
            patterns=[
                Pattern("continent-owned", ("Australia",)),
                Pattern("mine", ("Siam",)),
                Pattern("Siam", ("armies",), Var("n")),
                Pattern("budget", (), Var("b")),
            ],
            condition="n < 5 and b > 0",
            actions=[Emit(
                build=lambda b: Reinforce(
                    "Siam", min(calculate_needed(b["n"]), b["b"])),
                requires=("n", "b"))],
        ),
        Rule(
            name="reinforce-weakest-border",
            rule_set="risk-reinforce",
            order=1,
            patterns=[
                Pattern("border", (Var("t"),)),
                Pattern(Var("t"), ("armies",), Var("a")),
                Pattern("budget", (), Var("b")),
            ],
            condition="b > 0",
            aggregates=[Aggregate("min", "a", "WeakestArmies")],
            actions=[Emit(
                build=lambda b: Reinforce(b["t"], b["b"]),
                requires=("t", "b"))],
        ),
    ]
    kind, as_var = (("min", "MinEnemyArmies") if strategy == "weakest"
                    else ("max", "MaxEnemyArmies"))
    attack = [
        Rule(
            name=f"attack-{strategy}",
            rule_set="risk-attack",
            patterns=[
                Pattern("border", (Var("t1"),)),
                Pattern(Var("t1"), ("armies",), Var("a1")),
                Pattern(Var("t1"), ("adjacent", Var("t2"))),
                Pattern(Var("t2"), ("enemy",)),
                Pattern(Var("t2"), ("armies",), Var("a2")),
            ],
            condition="a1 > a2 + 1",
            aggregates=[Aggregate(kind, "a2", as_var)],
            guards=[f"a1 > {as_var} + 1"],
            actions=[Emit(
                build=lambda b: Attack(b["t1"], b["t2"],
                                       calculate_dice(b["a1"])),
                requires=("t1", "t2", "a1"))],
        ),
    ]
    fortify = [
        Rule(
            name="fortify-consolidate",
            rule_set="risk-fortify",
            patterns=[
                Pattern("interior", (Var("ti"),)),
                Pattern(Var("ti"), ("armies",), Var("ai")),
                Pattern(Var("ti"), ("connected", Var("tb"))),
                Pattern(Var("tb"), ("border",)),
            ],
            condition="ai > 1",
            aggregates=[Aggregate("max", "ai", "RichestInterior")],
            actions=[Emit(
                build=lambda b: Fortify(b["ti"], b["tb"], b["ai"] - 1),
                requires=("ti", "tb", "ai"))],
        ),
    ]
    return {"Reinforce": reinforce, "Attack": attack, "Fortify": fortify}
