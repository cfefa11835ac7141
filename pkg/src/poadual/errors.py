"""Exception hierarchy shared by every module."""


class PoaError(Exception):
    """Base class for all errors raised by this package."""


class MalformedLP(PoaError, ValueError):
    pass


class NumericOverflow(PoaError, ArithmeticError):
    """A rational grew past the configured size limit."""


class MissingVariable(PoaError, KeyError):
    pass


class CapExceeded(PoaError):
    """An enumeration would exceed a configured cap.

    ``dimension`` names the offending quantity so callers can report it.
    """

    def __init__(self, dimension: str, size: int, cap: int):
        super().__init__(f"{dimension} = {size} exceeds cap {cap}")
        self.dimension = dimension
        self.size = size
        self.cap = cap


class InvalidInstance(PoaError, ValueError):
    pass


class InvalidProfile(PoaError, ValueError):
    pass


class NotAnEquilibrium(PoaError):
    def __init__(self, message: str, slack=None):
        super().__init__(message)
        self.slack = slack


class InfeasibleCertificate(PoaError):
    pass


class SmoothnessViolation(PoaError):
    """A smoothness precondition failed; ``witness`` holds the violating point."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class WitnessSearchFailed(PoaError):
    """No witness action on the bid grid; ``triple`` is ``(player, type, bundle)``."""

    def __init__(self, message: str, triple=None):
        super().__init__(message)
        self.triple = triple


class ParseError(PoaError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column
