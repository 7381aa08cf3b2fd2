"""Exception hierarchy shared by the simulator, protocol runner and CLI."""


class QpmaError(Exception):
    """Base class for all package errors."""


class ValidationError(QpmaError, ValueError):
    """An input violates a named invariant.

    ``invariant`` is a short machine-friendly name that the CLI prints.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"[{invariant}] {message}")
        self.invariant = invariant


class DimensionGuardError(ValidationError):
    """A dense object would exceed the configured memory guard."""

    def __init__(self, message: str):
        super().__init__("dimension_guard", message)


class ScenarioParseError(QpmaError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ProtocolAbort(QpmaError):
    """The leader cannot complete decoding (e.g. an answer never arrived)."""


class ZeroProbabilityCondition(QpmaError):
    """A posterior was requested for an event of probability zero."""
