"""Players: three scripted baselines and the rule-driven tactical agent."""

from __future__ import annotations

import random
from typing import Any, Optional

from ..model import KnowledgeBase, KnowledgeSource
from ..rules import Fact, WorkingMemory, forward_chain
from ..trace import ReasoningTrace
from .board import Board
from .bus import TopicBus
from .game import (
    COMMAND_TOPIC,
    END,
    STATE_TOPIC,
    Attack,
    Fortify,
    Prompt,
    Reinforce,
)
from .strategy import risk_rule_packs, threat_facts


class Bot:
    """Subscribes to the state topic, answers own prompts on the command topic."""

    kind = "bot"
    cheat_armies = 0

    def __init__(self, seed_key: Any) -> None:
        self.rng = random.Random(str(seed_key))
        self.player = -1
        self.bus: Optional[TopicBus] = None

    def attach(self, bus: TopicBus, player: int, board: Board) -> None:
        self.bus = bus
        self.player = player
        self.board = board
        bus.subscribe(STATE_TOPIC, self._on_message)

    def _on_message(self, message: Any) -> None:
        if isinstance(message, Prompt) and message.player == self.player:
            self.bus.publish(COMMAND_TOPIC, (self.player, self.decide(message)))

    def decide(self, prompt: Prompt) -> Any:
        return END


class RandomBot(Bot):
    kind = "random"

    def decide(self, prompt: Prompt) -> Any:
        if prompt.phase == "Reinforce":
            return self._reinforce(prompt)
        if prompt.phase == "Attack":
            return self._attack(prompt.state)
        return self._fortify(prompt.state)

    def _reinforce(self, prompt: Prompt) -> Any:
        owned = prompt.state.owned(self.player)
        territory = self.rng.choice(owned)
        return Reinforce(territory, self.rng.randint(1, prompt.budget))

    def _frontier(self, state, friendly: bool) -> list:
        options = []
        for source in state.owned(self.player):
            if state.armies[source] < 2:
                continue
            for neighbor in sorted(state.board.neighbors(source)):
                if (state.owner[neighbor] == self.player) == friendly:
                    options.append((source, neighbor))
        return options

    def _attack(self, state) -> Any:
        options = self._frontier(state, friendly=False)
        pick = self.rng.randrange(len(options) + 1) if options else 0
        if not options or pick == len(options):
            return END
        source, target = options[pick]
        dice = self.rng.randint(1, min(3, state.armies[source] - 1))
        return Attack(source, target, dice)

    def _fortify(self, state) -> Any:
        options = self._frontier(state, friendly=True)
        pick = self.rng.randrange(len(options) + 1) if options else 0
        if not options or pick == len(options):
            return END
        source, target = options[pick]
        return Fortify(source, target,
                       self.rng.randint(1, state.armies[source] - 1))


class BenevolentBot(RandomBot):
    kind = "benevolent"

    def _attack(self, state) -> Any:
        return END


class CheaterBot(RandomBot):
    kind = "cheater"
    cheat_armies = 1


class AIAssetBot(Bot):
    """Keeps a tactical knowledge base in sync with the observed game and
    lets the phase rule packs choose each command."""

    def __init__(self, seed_key: Any, strategy: str = "weakest") -> None:
        super().__init__(seed_key)
        self.strategy = strategy
        self.kind = "aiasset" if strategy == "weakest" \
            else f"aiasset-{strategy}"
        self.rule_packs = risk_rule_packs(strategy)
        self.kb = KnowledgeBase()
        self.trace = ReasoningTrace()
        self.start_snapshot: Optional[KnowledgeBase] = None
        self._known: dict = {}
        self._wm = WorkingMemory()
        self._wm_facts: set = set()
        self._wm_phase = ""

    def attach(self, bus: TopicBus, player: int, board: Board) -> None:
        super().attach(bus, player, board)
        self.kb.put_cloud("Cloud-Tactical")
        for name in sorted(board.territories):
            territory = board.territories[name]
            self.kb.put_ks("Cloud-Tactical", KnowledgeSource(name, slots={
                "owner": -1,
                "armies": 0,
                "adjacent": {n: True for n in sorted(territory.neighbors)},
            }))
        self.start_snapshot = self.kb.snapshot()

    def _sync(self, state) -> None:
        for name in self.board.territories:
            observed = (state.owner[name], state.armies[name])
            if self._known.get(name) != observed:
                self.kb.set_slot(name, ("owner",), observed[0],
                                 cause="observe")
                self.kb.set_slot(name, ("armies",), observed[1],
                                 cause="observe")
                self._known[name] = observed

    def decide(self, prompt: Prompt) -> Any:
        self._sync(prompt.state)
        fresh = set(threat_facts(prompt.state, self.player, prompt.phase))
        fresh.add(Fact("budget", (), prompt.budget))
        if prompt.phase != self._wm_phase:
            self._wm = WorkingMemory()
            self._wm_facts = set()
            self._wm_phase = prompt.phase
        for fact in self._wm_facts - fresh:
            self._wm.discard(fact)
        for fact in fresh - self._wm_facts:
            self._wm.add(fact)
        self._wm_facts = fresh
        self.kb.clock += 1
        result = forward_chain(self.kb, self.rule_packs[prompt.phase],
                               wm=self._wm, max_cycles=1,
                               clock=self.kb.clock, trace=self.trace,
                               cause_prefix="risk")
        if result.emitted:
            return result.emitted[0]
        return END


BOT_KINDS = ("random", "benevolent", "cheater", "aiasset",
             "aiasset-weakest", "aiasset-strongest")


def make_bot(spec: str, seed: int, index: int) -> Bot:
    """Bot from a textual spec, rng-keyed to (game seed, seat, kind)."""
    key = f"{seed}:{index}:{spec}"
    if spec == "random":
        return RandomBot(key)
    if spec == "benevolent":
        return BenevolentBot(key)
    if spec == "cheater":
        return CheaterBot(key)
    if spec in ("aiasset", "aiasset-weakest"):
        return AIAssetBot(key, strategy="weakest")
    if spec == "aiasset-strongest":
        return AIAssetBot(key, strategy="strongest")
    raise ValueError(f"unknown bot spec {spec!r}; "
                     f"choose from {', '.join(BOT_KINDS)}")


def baseline_bot(kind: str, seed: Any) -> Bot:
    """One of the three scripted baselines with its own seeded rng."""
    if kind == "random":
        return RandomBot(seed)
    if kind == "benevolent":
        return BenevolentBot(seed)
    if kind == "cheater":
        return CheaterBot(seed)
    raise ValueError(f"unknown baseline bot {kind!r}")
