"""Exception types shared across the package."""

from __future__ import annotations


class GraphError(Exception):
    """Base class for every error raised by this package."""


class ParseError(GraphError):
    """A TSV input file is malformed. Message carries file and line number."""


class StructureError(GraphError):
    """Parsed input does not form a usable graph (e.g. no query-side nodes)."""


class ParameterError(GraphError, ValueError):
    """A parameter is outside its documented domain."""


class UnknownNodeError(ParameterError, KeyError):
    """A node id or index does not exist in the graph."""


class TimeBudgetExceeded(GraphError, RuntimeError):
    """A solver exceeded its wall-clock budget; ``elapsed`` holds seconds spent."""

    def __init__(self, message: str, elapsed: float):
        super().__init__(message)
        self.elapsed = elapsed
