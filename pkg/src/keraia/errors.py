"""Exception hierarchy shared by every engine module."""

from __future__ import annotations


class KeraiaError(Exception):
    """Base class for all engine errors."""


# --- knowledge model -------------------------------------------------------

class BadAppellation(KeraiaError):
    """Name violates the appellation format (or contains a reserved '/')."""


class AppellationConflict(KeraiaError):
    """Name already taken by a different cloud or knowledge source."""


class UnknownCloud(KeraiaError):
    pass


class UnknownKS(KeraiaError):
    pass


class CloudCycle(KeraiaError):
    """Inserting the sub-cloud would make containment cyclic."""


class PathThroughScalar(KeraiaError):
    """A slot path tried to descend through a non-map value."""


class BadSlotValue(KeraiaError):
    """Value is not representable as a slot value."""


# --- paths / resolution ----------------------------------------------------

class BadPath(KeraiaError):
    pass


class UnknownSegment(KeraiaError):
    """A path segment names nothing at that point of the walk."""


class AmbiguousSegment(KeraiaError):
    """A path segment matches both a sub-cloud and a knowledge source."""


class Unresolvable(KeraiaError):
    """Path is well-formed but no value is stored there."""


# --- ksynth ----------------------------------------------------------------

class KsynthSyntaxError(KeraiaError):
    """Parse failure; carries line and column of the offending token."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnresolvedReference(KeraiaError):
    """A document refers to a name that no declaration defines."""


class DuplicateAppellation(KeraiaError):
    """A document declares the same name twice in one namespace."""


class IncludeCycle(KeraiaError):
    """'use' directives form a cycle."""


# --- condition expressions -------------------------------------------------

class ConditionSyntaxError(KeraiaError):
    pass


class TypeMismatch(KeraiaError):
    """Operands of a comparison or arithmetic step have incompatible types."""


class UnknownPathInCondition(KeraiaError):
    """A condition referenced a role or path that does not resolve."""


# --- inheritance -----------------------------------------------------------

class InheritanceCycle(KeraiaError):
    """Multi-hop attribute resolution revisited a knowledge source."""


# --- rules / inference -----------------------------------------------------

class UnboundVariable(KeraiaError):
    """A consequent or aggregation uses a variable no pattern binds."""


class UnknownResponder(KeraiaError):
    pass


class CascadeLimitExceeded(KeraiaError):
    """Pulse dispatch exceeded the cascade depth limit."""


# --- lines of thought ------------------------------------------------------

class UnknownLoT(KeraiaError):
    pass


class ForkPredicateError(KeraiaError):
    """A fork guard raised while being evaluated."""


class DepthLimitExceeded(KeraiaError):
    """Nested line-of-thought activation went past the depth limit."""


class EmptyCandidates(KeraiaError):
    """select_kline was called with no candidate paths."""


# --- elaboration -----------------------------------------------------------

class MissingInput(KeraiaError):
    """A transformation's declared input path is absent on the source."""


class OutputCollision(KeraiaError):
    """A transformation's output appellation already exists."""


class UnknownTransformation(KeraiaError):
    pass


# --- game / bus ------------------------------------------------------------

class UnknownPlayer(KeraiaError):
    pass


class IllegalCommand(KeraiaError):
    """A game command failed validation (also logged when forfeited)."""
