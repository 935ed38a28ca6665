"""Frame-based knowledge engine: clouds of knowledge sources, conditional
inheritance, traceable lines of thought, and multi-paradigm inference."""

from .errors import KeraiaError
from .model import (
    UNSET,
    Cloud,
    Dimension,
    Juncture,
    KnowledgeBase,
    KnowledgeSource,
    Quantity,
    Ref,
)

__version__ = "0.1.0"

__all__ = [
    "KeraiaError",
    "KnowledgeBase",
    "KnowledgeSource",
    "Cloud",
    "Dimension",
    "Juncture",
    "Quantity",
    "Ref",
    "UNSET",
    "__version__",
]
