"""
Exception hierarchy for the staged RL workbench.

Configuration and contract errors subclass ValueError so callers that only
care about "bad input" can keep catching the builtin.
"""


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""


class ConfigurationError(WorkbenchError, ValueError):
    """Invalid configuration, stage wiring, layout dimensions or capacity."""


class ContractViolation(WorkbenchError, ValueError):
    """An operation was called with arguments violating its precondition."""


class WeightsLoadError(WorkbenchError):
    """A weights file is missing, corrupt, or does not fit the target."""


class QTableLoadError(WorkbenchError):
    """A Q-table file is missing or corrupt."""


class MetricsParseError(WorkbenchError):
    """A metrics CSV file could not be parsed."""

    def __init__(self, path, line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}:{line_number}: {message}")
