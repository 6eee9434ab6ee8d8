"""
Exception hierarchy for cmdesign.

Every error carries the process exit code the command-line front end uses
when the error escapes a subcommand, and a ``to_dict()`` payload for the
machine-readable ``--json`` error output.
"""

from typing import Any

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_IDENTIFIABLE = 2
EXIT_DATA_MISMATCH = 3
EXIT_UNSUPPORTED = 4


class CmdesignError(Exception):
    """Base class for all library errors."""

    exit_code = EXIT_INVALID

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        """Returns the error as a JSON-serializable dictionary."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (set, frozenset)):
        return sorted(_jsonable(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


# Graph construction


class ParseError(CmdesignError):
    """DSL text does not parse; carries the location when known."""

    def __init__(self, message: str, line: int | None = None,
                 column: int | None = None) -> None:
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}", line=line, column=column)
        self.line = line
        self.column = column


class ValidationError(CmdesignError):
    """A graph candidate violates the design-graph rules."""

    def __init__(self, report) -> None:
        lines = "; ".join(v.message for v in report.violations)
        super().__init__(
            f"invalid design graph: {lines}",
            violations=[v.to_dict() for v in report.violations],
        )
        self.report = report


class UnknownNode(CmdesignError):
    def __init__(self, node_ids) -> None:
        ids = sorted(node_ids)
        super().__init__(f"unknown node(s): {', '.join(ids)}", nodes=ids)
        self.node_ids = ids


class OverlappingSets(CmdesignError):
    def __init__(self, message: str, overlap=()) -> None:
        super().__init__(message, overlap=sorted(overlap))


class SNotInGraph(CmdesignError):
    def __init__(self, node_ids) -> None:
        ids = sorted(node_ids)
        super().__init__(
            f"selection-diagram variables are not causal nodes: {', '.join(ids)}",
            nodes=ids,
        )


class NoDataNode(CmdesignError):
    def __init__(self, node_id: str) -> None:
        super().__init__(f"causal node {node_id!r} has no data node", node=node_id)


# Identification and expressions


class NotIdentifiableError(CmdesignError):
    """Raised by callers that require an identifiable effect."""

    exit_code = EXIT_NOT_IDENTIFIABLE

    def __init__(self, component, hedge) -> None:
        super().__init__(
            "causal effect is not identifiable",
            component=sorted(component),
            hedge=sorted(hedge),
        )


class ExpressionError(CmdesignError):
    """A probability expression cannot be evaluated or decoded."""


class UnboundVariable(ExpressionError):
    def __init__(self, variable: str) -> None:
        super().__init__(f"variable {variable!r} is not covered by the joint table",
                         variable=variable)


class ZeroConditioningEvent(ExpressionError):
    def __init__(self, assignment: dict) -> None:
        shown = ", ".join(f"{k}={v}" for k, v in assignment.items())
        super().__init__(f"conditioning event has probability zero: {shown}",
                         assignment=assignment)
        self.assignment = assignment


# Data, models and estimation


class DataMismatch(CmdesignError):
    """Observed data do not fit the design (columns, values)."""

    exit_code = EXIT_DATA_MISMATCH


class RowMatchesNoStratum(DataMismatch):
    def __init__(self, row: dict) -> None:
        super().__init__(f"row matches no selection stratum: {_format_row(row)}",
                         row=row)
        self.row = row


class NonfiniteLogLik(DataMismatch):
    def __init__(self, row: dict) -> None:
        super().__init__(
            f"observed row has probability zero under the parameters: {_format_row(row)}",
            row=row,
        )
        self.row = row


class ModelError(CmdesignError):
    """A discrete model is inconsistent with its graph or parameters."""


class NonBinaryVariable(ModelError):
    def __init__(self, node_id: str, domain) -> None:
        super().__init__(f"variable {node_id!r} is not binary: domain {list(domain)}",
                         node=node_id, domain=list(domain))


class WrongModelFamily(ModelError):
    def __init__(self, missing) -> None:
        super().__init__(
            "parameters do not belong to the linear binary front-door family; "
            f"missing {', '.join(sorted(missing))}",
            missing=sorted(missing),
        )


class NoInteriorPoint(ModelError):
    def __init__(self, attempts: int) -> None:
        super().__init__(f"no valid starting point found after {attempts} draws",
                         attempts=attempts)


class StateSpaceTooLarge(CmdesignError):
    def __init__(self, states: int, cap: int) -> None:
        super().__init__(f"joint state space has {states} states, cap is {cap}",
                         states=states, cap=cap)


class SharedSelectionUnsupported(CmdesignError):
    exit_code = EXIT_UNSUPPORTED

    def __init__(self, node_ids) -> None:
        ids = sorted(node_ids)
        super().__init__(
            "unsupported shared selection: selection depends on other "
            f"individuals ({', '.join(ids)})",
            nodes=ids,
        )


# Command line


class UsageError(CmdesignError):
    """Arguments the command-line parser rejects."""

    def __init__(self, message: str, usage: str = "") -> None:
        super().__init__(message, usage=usage)
        self.usage = usage


def _format_row(row: dict) -> str:
    return ", ".join(f"{k}={'NA' if v is None else v}" for k, v in row.items())
