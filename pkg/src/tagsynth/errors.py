"""Shared exception types."""


class TagsynthError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(TagsynthError):
    """A structurally broken model or an ill-typed query against one."""


class NotAStateError(ModelError):
    """A (location, valuation) pair that violates the location invariant."""


class GameSpecError(TagsynthError):
    """Parse error in a .tg or .ctrl document, with source position."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}" + (f", col {col}" if col is not None else "") + f": {message}"
        super().__init__(message)


class AbstractionError(TagsynthError):
    """Internal consistency failure of the region abstraction."""


class CapacityError(TagsynthError):
    """A combinatorial enumeration exceeded its configured cap."""


class RuleViolation(TagsynthError):
    """A player proposed an unavailable move in the simulator."""

    def __init__(self, player, reason):
        self.player = player
        self.reason = reason
        super().__init__(f"player {player}: {reason}")
