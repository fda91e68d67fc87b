class SinklessError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(SinklessError, ValueError):
    pass


class GirthError(PreconditionError):
    """Input graph has a cycle too short for the requested locality radius."""

    def __init__(self, message: str, cycle=None):
        super().__init__(message if cycle is None else f"{message}; short cycle {list(cycle)}")
        self.cycle = cycle


class ResourceError(SinklessError, RuntimeError):
    """An attempt cap, phase cap or enumeration budget was exceeded."""


class RoundBudgetExceeded(SinklessError, RuntimeError):
    def __init__(self, rounds: int, partial):
        super().__init__(f"not all nodes announced within {rounds} rounds")
        self.rounds = rounds
        self.partial = partial


class FormatError(SinklessError, ValueError):
    def __init__(self, source: str, lineno: int, message: str):
        super().__init__(f"{source}:{lineno}: {message}")
        self.source = source
        self.lineno = lineno
