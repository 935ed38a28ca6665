"""Bundled scenario packs.

A pack is one ``.ksynth`` document shipped with the package.  ``load_pack``
parses it into a fresh knowledge base and pairs it with a responder registry
holding the built-in operations.  Set ``KERAIA_PACK_DIR`` to load packs from
a different directory instead, e.g. for testing modified copies.
"""

from __future__ import annotations

import os
from pathlib import Path

from ..events import ResponderRegistry
from ..ksynth import load_file
from ..model import KnowledgeBase

PACK_NAMES = ("naval", "water", "risk")


def pack_dir() -> Path:
    override = os.environ.get("KERAIA_PACK_DIR")
    if override:
        return Path(override)
    return Path(__file__).resolve().parent


def pack_path(name: str) -> Path:
    path = pack_dir() / f"{name}.ksynth"
    if not path.is_file():
        raise FileNotFoundError(f"no pack named {name!r} under {pack_dir()}")
    return path


def load_pack(name: str) -> tuple[KnowledgeBase, ResponderRegistry]:
    """Parse and load one bundled pack; returns (knowledge base, registry)."""
    kb = load_file(pack_path(name))
    return kb, ResponderRegistry(with_builtins=True)
