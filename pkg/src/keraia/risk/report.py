"""Tournament reporting: delimited results plus rendered figures."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .game import GameResult

RESULT_FIELDS = ("game", "seed", "turns", "outcome", "player", "bot",
                 "territories", "armies", "continents", "winner")
SERIES_FIELDS = ("game", "turn", "player", "bot", "territories", "armies",
                 "continents")


def result_rows(results: Iterable[GameResult]) -> List[dict]:
    """One row per (game, player) with the final standing."""
    rows = []
    for game, result in enumerate(results):
        final = result.series[-1] if result.series else []
        for player, kind in enumerate(result.bots):
            standing = final[player] if player < len(final) else {
                "territories": 0, "armies": 0, "continents": 0}
            rows.append({
                "game": game,
                "seed": result.seed,
                "turns": result.turns,
                "outcome": result.outcome,
                "player": player,
                "bot": kind,
                "territories": standing["territories"],
                "armies": standing["armies"],
                "continents": standing["continents"],
                "winner": int(result.winner == player),
            })
    return rows


def series_rows(results: Iterable[GameResult]) -> List[dict]:
    """One row per (game, turn, player) for trajectory plots."""
    rows = []
    for game, result in enumerate(results):
        for turn, snapshot in enumerate(result.series, start=1):
            for player, standing in enumerate(snapshot):
                rows.append({
                    "game": game,
                    "turn": turn,
                    "player": player,
                    "bot": result.bots[player],
                    "territories": standing["territories"],
                    "armies": standing["armies"],
                    "continents": standing["continents"],
                })
    return rows


def _write_csv(path: Path, fields: tuple, rows: List[dict]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fields))
        writer.writeheader()
        writer.writerows(rows)


def _render_figure(path: Path, results: List[GameResult]) -> None:
    fig, (wins_ax, series_ax) = plt.subplots(1, 2, figsize=(11, 4.5))

    seats = [f"P{p} {kind}" for p, kind in enumerate(results[0].bots)]
    wins = [sum(r.winner == p for r in results)
            for p in range(len(results[0].bots))]
    wins_ax.bar(range(len(seats)), wins, color="steelblue")
    wins_ax.set_xticks(range(len(seats)))
    wins_ax.set_xticklabels(seats, rotation=20, ha="right")
    wins_ax.set_ylabel("games won")
    wins_ax.set_title(f"Wins over {len(results)} games")

    first = results[0]
    turns = range(1, len(first.series) + 1)
    for player, kind in enumerate(first.bots):
        values = [snapshot[player]["territories"]
                  for snapshot in first.series]
        series_ax.plot(list(turns), values, label=f"P{player} {kind}")
    series_ax.set_xlabel("turn")
    series_ax.set_ylabel("territories held")
    series_ax.set_title(f"Game 0 (seed {first.seed})")
    series_ax.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(results: List[GameResult], out: str) -> dict:
    """Emit results CSV, per-turn series CSV, and a summary figure.

    The figure and series files sit alongside the main CSV, named after it.
    Returns the paths written.
    """
    if not results:
        raise ValueError("no game results to report")
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    series_path = out_path.with_name(out_path.stem + "_series.csv")
    figure_path = out_path.with_suffix(".png")

    _write_csv(out_path, RESULT_FIELDS, result_rows(results))
    _write_csv(series_path, SERIES_FIELDS, series_rows(results))
    _render_figure(figure_path, results)
    return {"results": str(out_path), "series": str(series_path),
            "figure": str(figure_path)}
