"""The classic 42-territory board, read from the bundled board pack."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..packs import load_pack

CONTINENT_PREFIX = "Continent-"


@dataclass(frozen=True)
class Territory:
    name: str
    continent: str
    neighbors: tuple


@dataclass(frozen=True)
class Board:
    territories: dict          # name -> Territory
    continent_bonus: dict      # continent name -> bonus armies
    continent_members: dict    # continent name -> tuple of territory names

    @property
    def names(self) -> tuple:
        return tuple(sorted(self.territories))

    def neighbors(self, name: str) -> tuple:
        return self.territories[name].neighbors

    def continent_of(self, name: str) -> str:
        return self.territories[name].continent

    def validate(self) -> None:
        if len(self.territories) != 42:
            raise ValueError(f"expected 42 territories, "
                             f"found {len(self.territories)}")
        for territory in self.territories.values():
            if territory.continent not in self.continent_bonus:
                raise ValueError(f"{territory.name} sits in unknown continent "
                                 f"{territory.continent!r}")
            for neighbor in territory.neighbors:
                other = self.territories.get(neighbor)
                if other is None:
                    raise ValueError(f"{territory.name} borders unknown "
                                     f"territory {neighbor!r}")
                if territory.name not in other.neighbors:
                    raise ValueError(f"adjacency {territory.name} -> "
                                     f"{neighbor} is one-way")
        reached = {"Alaska"}
        frontier = ["Alaska"]
        while frontier:
            for neighbor in self.territories[frontier.pop()].neighbors:
                if neighbor not in reached:
                    reached.add(neighbor)
                    frontier.append(neighbor)
        if len(reached) != 42:
            raise ValueError("board graph is not connected")


def _build(kb) -> Board:
    territories = {}
    bonus = {}
    members: dict[str, list] = {}
    for appellation, ks in kb.sources.items():
        if appellation.startswith(CONTINENT_PREFIX):
            bonus[appellation[len(CONTINENT_PREFIX):]] = ks.slots["bonus"]
        else:
            territory = Territory(appellation, ks.slots["continent"],
                                  tuple(ks.slots["neighbors"]))
            territories[appellation] = territory
            members.setdefault(territory.continent, []).append(appellation)
    board = Board(territories, bonus,
                  {c: tuple(sorted(ts)) for c, ts in sorted(members.items())})
    board.validate()
    return board


@lru_cache(maxsize=4)
def load_board() -> Board:
    """Board from the bundled pack, validated; cached after first load."""
    kb, _ = load_pack("risk")
    return _build(kb)
