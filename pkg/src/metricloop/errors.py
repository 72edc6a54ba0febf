"""Exception hierarchy shared across the harness.

Each top-level family maps to one CLI exit code (see ``cli.EXIT_CODES``).
"""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for every error raised by metricloop."""


class ConfigError(HarnessError):
    pass


class ParseError(HarnessError):
    """Malformed trial-record input.

    ``line`` is 1-based, ``offset`` is the byte offset of the start of that line.
    """

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        self.line = line
        self.offset = offset
        where = ""
        if line is not None:
            where = f" (line {line}, byte offset {offset})"
        super().__init__(f"{message}{where}")


class DomainFailure(HarnessError):
    """A domain could not produce a measurement for an intervention."""


class CompileError(DomainFailure):
    def __init__(self, message: str, diagnostics: str = ""):
        self.diagnostics = diagnostics
        super().__init__(message if not diagnostics else f"{message}\n{diagnostics}")


class RunError(DomainFailure):
    pass


class MarkerNotFound(DomainFailure):
    pass


class UnknownAction(DomainFailure):
    pass


class ProfilerUnavailable(HarnessError):
    pass


class Diverged(DomainFailure):
    pass


class AgentFailure(HarnessError):
    """The agent could not produce a valid decision."""


class SchemaViolation(AgentFailure):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class TransportError(AgentFailure):
    """Network or timeout failure talking to a remote model."""


class AnalysisError(HarnessError):
    pass


class EmptyInput(AnalysisError):
    pass


class DegenerateEntropy(AnalysisError):
    pass


class MissingMetric(AnalysisError):
    pass
