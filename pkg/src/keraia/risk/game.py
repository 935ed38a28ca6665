"""Turn-based game simulator: phases, battles, and the message protocol.

The simulator and the bots are two logical actors on one thread.  Every
decision travels over the TopicBus: the simulator publishes phase changes and
prompts on "datafusion-post", bots answer with one command (or an end-phase
marker) on "risk".  A command that violates the rules forfeits that action;
it is logged and the bot is prompted again, up to a per-phase cap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import IllegalCommand
from .board import Board, load_board
from .bus import TopicBus

STATE_TOPIC = "datafusion-post"
COMMAND_TOPIC = "risk"

PHASES = ("Reinforce", "Attack", "Fortify")
PROMPT_CAP = 100

# Classic initial army allotment by player count.
INITIAL_ARMIES = {2: 40, 3: 35, 4: 30, 5: 25, 6: 20}


# --- commands and bus messages ---------------------------------------------

@dataclass(frozen=True)
class Reinforce:
    territory: str
    armies: int


@dataclass(frozen=True)
class Attack:
    source: str
    target: str
    dice: int


@dataclass(frozen=True)
class Fortify:
    source: str
    target: str
    armies: int


@dataclass(frozen=True)
class EndPhase:
    pass


END = EndPhase()

GameCommand = (Reinforce, Attack, Fortify)


@dataclass(frozen=True)
class PhaseChange:
    player: int
    phase: str
    turn: int


@dataclass(frozen=True)
class Prompt:
    player: int
    phase: str
    turn: int
    budget: int
    state: "GameState"


@dataclass(frozen=True)
class CommandApplied:
    player: int
    command: Any


# --- game state ------------------------------------------------------------

@dataclass
class GameState:
    board: Board
    owner: dict                   # territory -> player index
    armies: dict                  # territory -> army count (always >= 1)
    active: list                  # per-player bool
    phase: str = "Reinforce"
    turn: int = 0
    seed: int = 0

    def owned(self, player: int) -> list:
        return sorted(t for t, p in self.owner.items() if p == player)

    def continents_owned(self, player: int) -> list:
        out = []
        for continent, members in self.board.continent_members.items():
            if all(self.owner[t] == player for t in members):
                out.append(continent)
        return out

    def total_armies(self, player: int) -> int:
        return sum(n for t, n in self.armies.items()
                   if self.owner[t] == player)

    def reinforcement_budget(self, player: int) -> int:
        base = max(3, len(self.owned(player)) // 3)
        bonus = sum(self.board.continent_bonus[c]
                    for c in self.continents_owned(player))
        return base + bonus

    def connected_through_owned(self, player: int, source: str,
                                target: str) -> bool:
        if self.owner.get(source) != player or self.owner.get(target) != player:
            return False
        seen = {source}
        frontier = [source]
        while frontier:
            for neighbor in self.board.neighbors(frontier.pop()):
                if self.owner.get(neighbor) == player and neighbor not in seen:
                    if neighbor == target:
                        return True
                    seen.add(neighbor)
                    frontier.append(neighbor)
        return source == target

    def check_invariants(self) -> None:
        if set(self.owner) != set(self.board.territories):
            raise RuntimeError("territory set drifted from the board")
        for territory, count in self.armies.items():
            if count < 1:
                raise RuntimeError(f"{territory} fell below one army")
        for territory, player in self.owner.items():
            if not 0 <= player < len(self.active):
                raise RuntimeError(f"{territory} owned by unknown player")


@dataclass
class GameResult:
    seed: int
    bots: list                    # bot kind per player
    winner: int = -1
    outcome: str = "turn-limit"   # "conquest" or "turn-limit"
    turns: int = 0
    command_log: list = field(default_factory=list)
    series: list = field(default_factory=list)   # per turn, per player dicts
    invariant_checks: int = 0
    final_state: Optional[GameState] = None


# --- battle resolution ------------------------------------------------------

def resolve_battle(attacker_rolls: list, defender_rolls: list) -> tuple:
    """(attacker losses, defender losses); ties favour the defender."""
    attacker_losses = defender_losses = 0
    paired = zip(sorted(attacker_rolls, reverse=True),
                 sorted(defender_rolls, reverse=True))
    for attack_die, defend_die in paired:
        if attack_die > defend_die:
            defender_losses += 1
        else:
            attacker_losses += 1
    return attacker_losses, defender_losses


# --- simulator --------------------------------------------------------------

class Simulator:
    def __init__(self, bots: list, seed: int, max_turns: int = 30,
                 bus: Optional[TopicBus] = None) -> None:
        self.board = load_board()
        self.bots = bots
        self.seed = seed
        self.max_turns = max_turns
        self.bus = bus if bus is not None else TopicBus()
        self.dice_rng = random.Random(f"{seed}:dice")
        self.setup_rng = random.Random(f"{seed}:setup")
        self.result = GameResult(seed=seed, bots=[b.kind for b in bots])
        self._inbox: list = []
        self.state = self._deal()
        self.bus.subscribe(COMMAND_TOPIC, self._inbox.append)
        for index, bot in enumerate(self.bots):
            bot.attach(self.bus, index, self.board)

    # -- setup --------------------------------------------------------------

    def _deal(self) -> GameState:
        players = len(self.bots)
        if players not in INITIAL_ARMIES:
            raise IllegalCommand(f"supported player counts are 2..6, "
                                 f"got {players}")
        names = sorted(self.board.territories)
        self.setup_rng.shuffle(names)
        owner = {}
        armies = {}
        for index, name in enumerate(names):
            owner[name] = index % players
            armies[name] = 1
        remaining = {p: INITIAL_ARMIES[players] - len(names[p::players])
                     for p in range(players)}
        for player in range(players):
            holdings = sorted(t for t, o in owner.items() if o == player)
            for _ in range(remaining[player]):
                armies[self.setup_rng.choice(holdings)] += 1
        state = GameState(board=self.board, owner=owner, armies=armies,
                          active=[True] * players, seed=self.seed)
        state.check_invariants()
        return state

    # -- protocol -----------------------------------------------------------

    def _prompt(self, player: int, phase: str, budget: int) -> Any:
        self._inbox.clear()
        self.bus.publish(STATE_TOPIC, Prompt(player, phase, self.state.turn,
                                             budget, self.state))
        for message in self._inbox:
            if isinstance(message, tuple) and len(message) == 2 \
                    and message[0] == player:
                return message[1]
        return END

    def _log(self, *entry: Any) -> None:
        self.result.command_log.append(entry)

    def _applied(self, player: int, command: Any) -> None:
        self.state.check_invariants()
        self.result.invariant_checks += 1
        self.bus.publish(STATE_TOPIC, CommandApplied(player, command))

    # -- phases -------------------------------------------------------------

    def _reinforce_phase(self, player: int) -> None:
        state = self.state
        state.phase = "Reinforce"
        self.bus.publish(STATE_TOPIC, PhaseChange(player, "Reinforce",
                                                  state.turn))
        budget = state.reinforcement_budget(player)
        cheat = getattr(self.bots[player], "cheat_armies", 0)
        if cheat:
            budget += cheat
            self._log("cheat", player, cheat)
        prompts = 0
        while budget > 0 and prompts < PROMPT_CAP:
            prompts += 1
            command = self._prompt(player, "Reinforce", budget)
            if isinstance(command, EndPhase):
                break
            try:
                budget = self._apply_reinforce(player, command, budget)
            except IllegalCommand as exc:
                self._log("forfeit", player, repr(command), str(exc))

    def _apply_reinforce(self, player: int, command: Any, budget: int) -> int:
        if not isinstance(command, Reinforce):
            raise IllegalCommand(f"expected Reinforce, got {command!r}")
        state = self.state
        if state.owner.get(command.territory) != player:
            raise IllegalCommand(f"{command.territory} is not owned "
                                 f"by player {player}")
        if not 1 <= command.armies <= budget:
            raise IllegalCommand(f"reinforcement of {command.armies} outside "
                                 f"budget {budget}")
        state.armies[command.territory] += command.armies
        self._log("reinforce", player, command.territory, command.armies)
        self._applied(player, command)
        return budget - command.armies

    def _attack_phase(self, player: int) -> bool:
        """Runs battles until the bot stops; True if the game ended."""
        state = self.state
        state.phase = "Attack"
        self.bus.publish(STATE_TOPIC, PhaseChange(player, "Attack",
                                                  state.turn))
        prompts = 0
        while prompts < PROMPT_CAP:
            prompts += 1
            command = self._prompt(player, "Attack", 0)
            if isinstance(command, EndPhase):
                break
            try:
                if self._apply_attack(player, command):
                    return True
            except IllegalCommand as exc:
                self._log("forfeit", player, repr(command), str(exc))
        return False

    def _apply_attack(self, player: int, command: Any) -> bool:
        if not isinstance(command, Attack):
            raise IllegalCommand(f"expected Attack, got {command!r}")
        state = self.state
        source, target, dice = command.source, command.target, command.dice
        if state.owner.get(source) != player:
            raise IllegalCommand(f"{source} is not owned by player {player}")
        if state.owner.get(target) == player:
            raise IllegalCommand(f"{target} is already friendly")
        if target not in self.board.neighbors(source):
            raise IllegalCommand(f"{source} does not border {target}")
        if not 1 <= dice <= 3:
            raise IllegalCommand(f"attack dice must be 1..3, got {dice}")
        if dice > state.armies[source] - 1:
            raise IllegalCommand(f"{source} cannot roll {dice} with "
                                 f"{state.armies[source]} armies")
        defender = state.owner[target]
        defend_dice = min(2, state.armies[target])
        attacker_rolls = [self.dice_rng.randint(1, 6) for _ in range(dice)]
        defender_rolls = [self.dice_rng.randint(1, 6)
                          for _ in range(defend_dice)]
        attacker_losses, defender_losses = resolve_battle(attacker_rolls,
                                                          defender_rolls)
        state.armies[source] -= attacker_losses
        state.armies[target] -= defender_losses
        conquered = state.armies[target] == 0
        if conquered:
            # Conqueror advances everything but a single garrison.
            moved = state.armies[source] - 1
            state.owner[target] = player
            state.armies[target] = moved
            state.armies[source] = 1
        self._log("attack", player, source, target, dice,
                  tuple(attacker_rolls), tuple(defender_rolls),
                  attacker_losses, defender_losses, int(conquered))
        self._applied(player, command)
        if conquered and not self.state.owned(defender):
            self.state.active[defender] = False
            self._log("eliminated", defender)
        if conquered and len(state.owned(player)) == 42:
            return True
        return False

    def _fortify_phase(self, player: int) -> None:
        state = self.state
        state.phase = "Fortify"
        self.bus.publish(STATE_TOPIC, PhaseChange(player, "Fortify",
                                                  state.turn))
        prompts = 0
        while prompts < PROMPT_CAP:
            prompts += 1
            command = self._prompt(player, "Fortify", 0)
            if isinstance(command, EndPhase):
                return
            try:
                self._apply_fortify(player, command)
                return
            except IllegalCommand as exc:
                self._log("forfeit", player, repr(command), str(exc))

    def _apply_fortify(self, player: int, command: Any) -> None:
        if not isinstance(command, Fortify):
            raise IllegalCommand(f"expected Fortify, got {command!r}")
        state = self.state
        source, target, armies = command.source, command.target, command.armies
        if state.owner.get(source) != player \
                or state.owner.get(target) != player:
            raise IllegalCommand("fortify endpoints must both be friendly")
        if source == target:
            raise IllegalCommand("fortify endpoints must differ")
        if not state.connected_through_owned(player, source, target):
            raise IllegalCommand(f"{source} and {target} are not connected "
                                 f"through friendly territory")
        if not 1 <= armies <= state.armies[source] - 1:
            raise IllegalCommand(f"cannot move {armies} armies out of "
                                 f"{source}")
        state.armies[source] -= armies
        state.armies[target] += armies
        self._log("fortify", player, source, target, armies)
        self._applied(player, command)

    # -- main loop ----------------------------------------------------------

    def run(self) -> GameResult:
        state = self.state
        finished = False
        for turn in range(1, self.max_turns + 1):
            state.turn = turn
            for player in range(len(self.bots)):
                if not state.active[player]:
                    continue
                self._reinforce_phase(player)
                if self._attack_phase(player):
                    finished = True
                    break
                self._fortify_phase(player)
            self._record_turn()
            if finished:
                break
        self.result.turns = state.turn
        self._settle(finished)
        self.result.final_state = state
        return self.result

    def _record_turn(self) -> None:
        snapshot = []
        for player in range(len(self.bots)):
            snapshot.append({
                "territories": len(self.state.owned(player)),
                "armies": self.state.total_armies(player),
                "continents": len(self.state.continents_owned(player)),
            })
        self.result.series.append(snapshot)

    def _settle(self, finished: bool) -> None:
        if finished:
            self.result.outcome = "conquest"
            self.result.winner = next(
                p for p in range(len(self.bots))
                if len(self.state.owned(p)) == 42)
            return
        self.result.outcome = "turn-limit"
        standings = sorted(
            range(len(self.bots)),
            key=lambda p: (-len(self.state.owned(p)),
                           -self.state.total_armies(p), p))
        self.result.winner = standings[0]


def simulate_game(bots: list, seed: int, max_turns: int = 30,
                  bus: Optional[TopicBus] = None) -> GameResult:
    """Play one full game; deterministic given (bots, seed, max_turns)."""
    from .bots import make_bot
    instances = [bot if hasattr(bot, "attach") else make_bot(bot, seed, i)
                 for i, bot in enumerate(bots)]
    return Simulator(instances, seed, max_turns=max_turns, bus=bus).run()
