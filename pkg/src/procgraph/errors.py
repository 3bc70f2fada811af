"""Exception hierarchy shared by every engine in the package."""

from __future__ import annotations


class ProcGraphError(Exception):
    """Base class for all errors raised by procgraph."""


class CyclicRelationshipError(ProcGraphError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("relationship edges form a cycle: " + " -> ".join(cycle))


class MalformedTriple(ProcGraphError):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"malformed triple at index {index}: {reason}")


class UnknownNode(ProcGraphError, KeyError):
    def __init__(self, node: object):
        self.node = node
        super().__init__(f"unknown node: {node}")

    def __str__(self) -> str:
        return self.args[0]


class IoError(ProcGraphError, OSError):
    pass


class EmptyInput(ProcGraphError):
    pass


class MissingColumn(ProcGraphError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"event log has no column named {column!r}")


class BadTimestamp(ProcGraphError, ValueError):
    pass


class NotAnEvent(ProcGraphError):
    def __init__(self, node: object, reason: str = "not an event"):
        self.node = node
        super().__init__(f"{node}: {reason}")


class QuerySyntaxError(ProcGraphError):
    """Parse failure with a 1-based line/column and the tokens that would have been accepted."""

    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        self.at_end = False  # set when input ran out; a shell may keep reading
        text = f"{line}:{column}: {message}"
        if expected:
            text += " (expected " + ", ".join(sorted(expected)) + ")"
        super().__init__(text)


class UnknownFilterKey(ProcGraphError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unknown metadata filter key {key!r}")


class RegexSyntaxError(ProcGraphError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"path regex error at position {position}: {message}")


class UnboundedSearch(ProcGraphError):
    pass


class DuplicateName(ProcGraphError):
    pass


class UnknownAttribute(ProcGraphError):
    pass


class UnknownRegisteredCondition(ProcGraphError):
    pass


class UnknownAlgorithm(ProcGraphError):
    pass


class UnknownAggregate(ProcGraphError):
    pass


class NoDefiningQuery(ProcGraphError):
    pass


class NotAVersion(ProcGraphError):
    pass


class UnknownEntity(ProcGraphError):
    pass


class DisconnectedQuery(ProcGraphError):
    pass


class EvaluationTimeout(ProcGraphError):
    pass


class UnknownSnapshot(ProcGraphError):
    pass


class SnapshotInUse(ProcGraphError):
    pass
