"""Exception hierarchy shared by every module."""

from __future__ import annotations


class StagflatError(Exception):
    """Base class."""


class DomainError(StagflatError, ValueError):
    """A point, circle or disk leaves the window where the field is defined."""


class WindowError(DomainError):
    """Radius outside the admissible range of an analysis window."""


class InvalidSpecError(StagflatError, ValueError):
    pass


class ParseError(StagflatError, ValueError):
    pass


class InvariantViolationError(StagflatError, ValueError):
    """Data breaks a structural invariant (e.g. negative stream function)."""


class DegenerateDenominatorError(StagflatError, ZeroDivisionError):
    """A ratio functional was requested where its boundary norm vanishes."""


class InsufficientDataError(StagflatError, ValueError):
    pass


class PreconditionError(StagflatError, ValueError):
    pass


class ConfigError(StagflatError, ValueError):
    pass
