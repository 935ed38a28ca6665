"""Territory-conquest wargame: simulator, bots, threat tables, reporting."""

from .board import Board, Territory, load_board
from .bots import (
    AIAssetBot,
    BOT_KINDS,
    Bot,
    BenevolentBot,
    CheaterBot,
    RandomBot,
    baseline_bot,
    make_bot,
)
from .bus import TopicBus
from .game import (
    Attack,
    CommandApplied,
    EndPhase,
    END,
    Fortify,
    GameResult,
    GameState,
    PhaseChange,
    Prompt,
    Reinforce,
    Simulator,
    resolve_battle,
    simulate_game,
)
from .report import write_report
from .strategy import (
    ThreatRow,
    ThreatTable,
    build_threat_table,
    calculate_dice,
    calculate_needed,
    risk_rule_packs,
    threat_facts,
)

__all__ = [
    "AIAssetBot",
    "Attack",
    "BOT_KINDS",
    "BenevolentBot",
    "Board",
    "Bot",
    "CheaterBot",
    "CommandApplied",
    "END",
    "EndPhase",
    "Fortify",
    "GameResult",
    "GameState",
    "PhaseChange",
    "Prompt",
    "RandomBot",
    "Reinforce",
    "Simulator",
    "Territory",
    "ThreatRow",
    "ThreatTable",
    "TopicBus",
    "baseline_bot",
    "build_threat_table",
    "calculate_dice",
    "calculate_needed",
    "load_board",
    "make_bot",
    "resolve_battle",
    "risk_rule_packs",
    "simulate_game",
    "threat_facts",
    "write_report",
]
