from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"Invalid source position {self.line}:{self.column}")

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"

    def to_dict(self):
        return {"file": self.file, "line": self.line, "column": self.column, "length": self.length}


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: SourceSpan | None = None
    table: str | None = None

    @property
    def is_error(self):
        return self.severity is Severity.ERROR

    def format(self):
        where = f"{self.span}: " if self.span else ""
        table = f" (table {self.table!r})" if self.table else ""
        return f"{where}{self.severity.value}[{self.code}]: {self.message}{table}"

    def to_dict(self):
        return {
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
            "table": self.table,
            "span": self.span.to_dict() if self.span else None,
        }


class PdmnError(Exception):
    """Base class of every error raised by pdmn."""

    def __init__(self, message, span=None):
        super().__init__(message)
        self.message = message
        self.span = span

    @property
    def code(self):
        return type(self).__name__

    def format(self):
        where = f"{self.span}: " if self.span else ""
        return f"{where}error[{self.code}]: {self.message}"

    def with_span(self, span):
        """Attach a span if the error does not carry one yet."""
        if self.span is None:
            self.span = span
        return self


# --- Parsing


class ParseError(PdmnError):
    pass


class TableSyntaxError(ParseError):
    pass


class UnknownPolicy(ParseError):
    pass


class CellSyntaxError(ParseError):
    pass


class LogicSyntaxError(ParseError):
    pass


class WorkbookParseError(PdmnError):
    """All errors found while reading one workbook."""

    def __init__(self, errors):
        self.errors = list(errors)
        summary = self.errors[0].message if self.errors else "invalid workbook"
        super().__init__(summary, self.errors[0].span if self.errors else None)

    def format(self):
        return "\n".join(error.format() for error in self.errors)


# --- Model


class ModelError(PdmnError):
    pass


class InvalidName(ModelError):
    pass


class InvalidType(ModelError):
    pass


class UnknownSymbol(ModelError):
    pass


class AmbiguousSymbol(ModelError):
    pass


class TypeMismatch(ModelError):
    pass


class UnknownElement(ModelError):
    pass


class InvalidProbability(ModelError):
    pass


class NotAFunction(ModelError):
    pass


class DuplicateDecl(ModelError):
    pass


class NonGroundFact(ModelError):
    pass


# --- Engine


class EngineError(PdmnError):
    pass


class UnsafeVariable(EngineError):
    def __init__(self, statement, variable):
        super().__init__(f"variable {variable} in '{statement}' is not bound by a positive fact-defined literal")
        self.statement = statement
        self.variable = variable


class NotStratified(EngineError):
    def __init__(self, cycle):
        rendered = " -> ".join(str(atom) for atom in cycle)
        super().__init__(f"negation through a cycle: {rendered}")
        self.cycle = tuple(cycle)


class ChoiceSpaceTooLarge(EngineError):
    def __init__(self, choice_points, cap):
        super().__init__(f"{choice_points} independent choice points exceed the cap of {cap}")
        self.choice_points = choice_points
        self.cap = cap


class ProbabilisticHeadConflict(EngineError):
    pass


class InconsistentWeights(EngineError):
    pass
