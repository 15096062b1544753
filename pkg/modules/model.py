"""
In-memory representation of a pDMN workbook.

Glossary declarations, decision tables, fact tables and the query set, plus the
checks that need nothing but the model itself (name mangling, header
resolution, validation).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations

from modules.config import CONFIG
from modules.errors import (
    AmbiguousSymbol,
    Diagnostic,
    InvalidName,
    InvalidType,
    Severity,
    SourceSpan,
    TypeMismatch,
    UnknownSymbol,
)
from modules.rational import Probability, format_fraction, parse_number

Element = str | Fraction

_NAME_CHARS = re.compile(r"[A-Za-z0-9_\s]+")
_MANGLED = re.compile(r"[a-z][a-z0-9_]*")
_IDENTIFIER = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_QUANTIFIER = re.compile(r"[A-Z]")


def mangle_name(raw_name: str) -> str:
    """Turn a glossary name like 'vaccine of Person' into 'vaccine_of_person'."""
    stripped = raw_name.strip()
    if not stripped or not _NAME_CHARS.fullmatch(stripped):
        raise InvalidName(f"{raw_name!r} may only contain letters, digits and spaces")
    mangled = re.sub(r"\s+", "_", stripped).lower()
    if not _MANGLED.fullmatch(mangled):
        raise InvalidName(f"{raw_name!r} must start with a letter")
    return mangled


def is_quantifier(token: str) -> bool:
    return bool(_QUANTIFIER.fullmatch(token))


def format_element(element: Element) -> str:
    if isinstance(element, Fraction):
        return format_fraction(element)
    return element


def mangle_element(element: Element) -> Element:
    if isinstance(element, Fraction):
        return element
    return mangle_name(element)


def parse_element_literal(text: str) -> Element | None:
    """An element as written in a Type table: a number or an identifier."""
    number = parse_number(text)
    if number is not None:
        return number
    if _IDENTIFIER.fullmatch(text) and not is_quantifier(text):
        return text
    return None


def fresh_letters(used):
    """Quantifier letters not in used, in the configured order."""
    return [letter for letter in CONFIG["QUERY_VARIABLES"] if letter not in used]


# --- Glossary


@dataclass(frozen=True)
class TypeDecl:
    name: str
    elements: tuple[Element, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.elements:
            raise InvalidType(f"type {self.name} has no elements", self.span)
        seen = set()
        for element in self.elements:
            key = element.lower() if isinstance(element, str) else element
            if key in seen:
                raise InvalidType(f"type {self.name} lists {format_element(element)} twice", self.span)
            seen.add(key)
        numeric = [isinstance(element, Fraction) for element in self.elements]
        if any(numeric) and not all(numeric):
            raise InvalidType(f"type {self.name} mixes numbers and symbols", self.span)

    @property
    def numeric(self) -> bool:
        return isinstance(self.elements[0], Fraction)

    @property
    def mangled(self) -> str:
        return mangle_name(self.name)

    def parse_element(self, text: str) -> Element | None:
        """Return the element of this type written as text, or None."""
        text = text.strip()
        if self.numeric:
            value = parse_number(text)
            return value if value in self.elements else None
        return text if text in self.elements else None


@dataclass(frozen=True)
class PredicateDecl:
    raw_name: str
    arg_types: tuple[TypeDecl, ...]
    mangled: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.raw_name.split())

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @property
    def logic_arity(self) -> int:
        return self.arity


@dataclass(frozen=True)
class FunctionDecl:
    raw_name: str
    arg_types: tuple[TypeDecl, ...]
    range_type: TypeDecl
    mangled: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.raw_name.split())

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @property
    def logic_arity(self) -> int:
        # the value becomes an extra argument
        return self.arity + 1


Symbol = PredicateDecl | FunctionDecl


def _argument_types(raw_name: str, types: dict[str, TypeDecl]) -> tuple[TypeDecl, ...]:
    return tuple(types[token] for token in raw_name.split() if token in types)


def declare_predicate(raw_name: str, types: dict[str, TypeDecl], span=None) -> PredicateDecl:
    raw_name = " ".join(raw_name.split())
    return PredicateDecl(raw_name, _argument_types(raw_name, types), mangle_name(raw_name), span)


def declare_function(raw_name: str, range_type: TypeDecl, types: dict[str, TypeDecl], span=None) -> FunctionDecl:
    raw_name = " ".join(raw_name.split())
    return FunctionDecl(raw_name, _argument_types(raw_name, types), range_type, mangle_name(raw_name), span)


@dataclass(frozen=True)
class Glossary:
    types: tuple[TypeDecl, ...] = ()
    predicates: tuple[PredicateDecl, ...] = ()
    functions: tuple[FunctionDecl, ...] = ()

    @property
    def symbols(self) -> tuple[Symbol, ...]:
        return self.predicates + self.functions

    @property
    def type_names(self) -> dict[str, TypeDecl]:
        return {decl.name: decl for decl in self.types}


# --- Cells


class HitPolicy(str, Enum):
    UNIQUE = "U"
    ANY = "A"
    FIRST = "F"
    CHOICE = "Ch"

    @classmethod
    def parse(cls, text: str) -> HitPolicy | None:
        lowered = text.strip().lower()
        for policy in cls:
            if lowered in (policy.value.lower(), policy.name.lower()):
                return policy
        return None


class Side(str, Enum):
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class DontCare:
    pass


@dataclass(frozen=True)
class ValueLiteral:
    value: Element


@dataclass(frozen=True)
class ValueSet:
    values: tuple[Element, ...]


@dataclass(frozen=True)
class Comparison:
    op: str
    value: Fraction

    def holds(self, element: Fraction) -> bool:
        if self.op == "<":
            return element < self.value
        if self.op == "<=":
            return element <= self.value
        if self.op == ">":
            return element > self.value
        return element >= self.value


@dataclass(frozen=True)
class Range:
    lo: Fraction
    hi: Fraction

    def holds(self, element: Fraction) -> bool:
        return self.lo <= element <= self.hi


@dataclass(frozen=True)
class BoolLiteral:
    value: bool


@dataclass(frozen=True)
class VarRef:
    letter: str


@dataclass(frozen=True)
class ProbabilityLiteral:
    probability: Probability


CellExpr = DontCare | ValueLiteral | ValueSet | Comparison | Range | BoolLiteral | VarRef | ProbabilityLiteral


def render_cell(cell: CellExpr) -> str:
    match cell:
        case DontCare():
            return "-"
        case ValueLiteral(value):
            return format_element(value)
        case ValueSet(values):
            return ", ".join(format_element(value) for value in values)
        case Comparison(op, value):
            return f"{op} {format_fraction(value)}"
        case Range(lo, hi):
            return f"[{format_fraction(lo)}..{format_fraction(hi)}]"
        case BoolLiteral(value):
            return "Yes" if value else "No"
        case VarRef(letter):
            return letter
        case ProbabilityLiteral(probability):
            return probability.render()
    raise TypeError(f"not a cell expression: {cell!r}")


# --- Tables


Binding = VarRef | Element


@dataclass(frozen=True)
class ColumnHeader:
    target: Symbol
    bindings: tuple[Binding, ...]
    side: Side
    width: int = 1
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def is_function(self) -> bool:
        return isinstance(self.target, FunctionDecl)

    @property
    def value_type(self) -> TypeDecl | None:
        """Type of the column's cells: the function's range, None for predicates."""
        return self.target.range_type if self.is_function else None

    def variables(self) -> dict[str, TypeDecl]:
        return {
            binding.letter: arg_type
            for binding, arg_type in zip(self.bindings, self.target.arg_types)
            if isinstance(binding, VarRef)
        }

    def domain(self) -> frozenset:
        """Every value a cell of this column can match."""
        if self.value_type is None:
            return frozenset((True, False))
        return frozenset(self.value_type.elements)


def render_header(header: ColumnHeader) -> str:
    bindings = iter(header.bindings)
    arg_types = {decl.name for decl in header.target.arg_types}
    tokens = []
    for token in header.target.tokens:
        if token in arg_types:
            binding = next(bindings)
            tokens.append(binding.letter if isinstance(binding, VarRef) else format_element(binding))
        else:
            tokens.append(token)
    return " ".join(tokens)


def resolve_header(text: str, glossary: Glossary, side: Side = Side.INPUT, reserved=frozenset(), span=None) -> ColumnHeader:
    """
    Find the declaration a column header refers to and bind its arguments.

    Type tokens of the declaration act as wildcards; the header puts a
    quantifier letter, an element or a type name in their place. A type name
    becomes a fresh quantifier letter not in reserved.

    Args:
        text (str): Header text such as "X contacted Y" or "vaccine of bob".
        glossary (Glossary): Declarations to match against.
        side (Side): Whether the column is an input or an output.
        reserved (Iterable[str]): Letters a fresh letter must avoid.
        span (SourceSpan | None): Location reported with errors.

    Returns:
        ColumnHeader: The matched declaration with its argument bindings.

    Raises:
        UnknownSymbol: Nothing in the glossary matches.
        AmbiguousSymbol: Several declarations match and typechecking cannot pick one.
        TypeMismatch: An element or type name does not fit its argument.
    """
    tokens = text.split()
    if not tokens:
        raise UnknownSymbol("empty column header", span)
    types = glossary.type_names
    candidates = []
    for decl in glossary.symbols:
        if len(decl.tokens) != len(tokens):
            continue
        slot_types = iter(decl.arg_types)
        slots = []
        for decl_token, token in zip(decl.tokens, tokens):
            if decl_token in types:
                slots.append((token, next(slot_types)))
            elif decl_token != token:
                break
        else:
            candidates.append((decl, slots))
    if not candidates:
        raise UnknownSymbol(f"{text!r} matches no predicate or function in the glossary", span)
    if len(candidates) > 1:
        typed = [(decl, slots) for decl, slots in candidates if _slots_typecheck(slots, types)]
        if len(typed) != 1:
            names = ", ".join(repr(decl.raw_name) for decl, _ in candidates)
            raise AmbiguousSymbol(f"{text!r} matches several declarations: {names}", span)
        candidates = typed
    decl, slots = candidates[0]

    used = set(reserved) | {token for token in tokens if is_quantifier(token)}
    spare = iter(fresh_letters(used))
    bindings = []
    for token, arg_type in slots:
        if is_quantifier(token):
            bindings.append(VarRef(token))
        elif token in types:
            if types[token] != arg_type:
                raise TypeMismatch(f"{token} used where {decl.raw_name!r} expects {arg_type.name}", span)
            letter = next(spare, None)
            if letter is None:
                raise TypeMismatch(f"no quantifier letter left for {token} in {text!r}", span)
            bindings.append(VarRef(letter))
        else:
            element = arg_type.parse_element(token)
            if element is None:
                raise TypeMismatch(f"{token!r} is not an element of {arg_type.name} in {text!r}", span)
            bindings.append(element)
    return ColumnHeader(decl, tuple(bindings), side, span=span)


def _slots_typecheck(slots, types) -> bool:
    for token, arg_type in slots:
        if is_quantifier(token):
            continue
        if token in types:
            if types[token] != arg_type:
                return False
        elif arg_type.parse_element(token) is None:
            return False
    return True


@dataclass(frozen=True)
class RuleRow:
    inputs: tuple[CellExpr, ...]
    outputs: tuple[CellExpr, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DecisionTable:
    name: str
    policy: HitPolicy
    inputs: tuple[ColumnHeader, ...]
    outputs: tuple[ColumnHeader, ...]
    value_row: tuple[CellExpr, ...] | None
    rows: tuple[RuleRow, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def probabilistic(self) -> bool:
        return self.value_row is not None

    def output_slots(self):
        """(slot index, output column) for every output cell position."""
        slot = 0
        for column in self.outputs:
            for _ in range(column.width):
                yield slot, column
                slot += 1

    def variables(self) -> dict[str, TypeDecl]:
        """Quantifier letters bound by the headers, in order of first use."""
        letters = {}
        for column in self.inputs + self.outputs:
            for letter, arg_type in column.variables().items():
                letters.setdefault(letter, arg_type)
        return letters

    def row_variables(self, row: RuleRow) -> dict[str, TypeDecl]:
        """Letters a row's input cells bind beyond the header letters."""
        header = self.variables()
        letters = {}
        for column, cell in zip(self.inputs, row.inputs):
            if isinstance(cell, VarRef) and cell.letter not in header:
                letters.setdefault(cell.letter, column.value_type)
        return letters


@dataclass(frozen=True)
class PredicateAtom:
    target: PredicateDecl
    args: tuple[Binding, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def ground(self) -> bool:
        return not any(isinstance(arg, VarRef) for arg in self.args)


@dataclass(frozen=True)
class FunctionAtom:
    target: FunctionDecl
    args: tuple[Binding, ...]
    value: Binding
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def ground(self) -> bool:
        return not any(isinstance(arg, VarRef) for arg in self.args + (self.value,))


QueryEntry = PredicateAtom | FunctionAtom


def render_entry(entry: QueryEntry) -> str:
    header = ColumnHeader(entry.target, entry.args, Side.INPUT)
    text = render_header(header)
    if isinstance(entry, FunctionAtom):
        value = entry.value.letter if isinstance(entry.value, VarRef) else format_element(entry.value)
        text = f"{text} = {value}"
    return text


@dataclass(frozen=True)
class FactTable:
    name: str
    rows: tuple[QueryEntry, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class QuerySet:
    entries: tuple[QueryEntry, ...]
    implicit_all: bool = False

    @classmethod
    def all_symbols(cls, glossary: Glossary) -> QuerySet:
        """One query per declaration, every position a fresh quantifier letter."""
        entries = []
        for decl in glossary.symbols:
            letters = iter(fresh_letters(()))
            args = tuple(VarRef(next(letters)) for _ in decl.arg_types)
            if isinstance(decl, FunctionDecl):
                entries.append(FunctionAtom(decl, args, VarRef(next(letters))))
            else:
                entries.append(PredicateAtom(decl, args))
        return cls(tuple(entries), implicit_all=True)


@dataclass(frozen=True)
class PdmnModel:
    name: str
    glossary: Glossary
    tables: tuple[DecisionTable, ...] = ()
    facts: tuple[FactTable, ...] = ()
    queries: QuerySet = QuerySet(())


# --- Validation


def cell_domain(cell: CellExpr, column: ColumnHeader) -> frozenset:
    """The values of column a cell matches, for syntactic overlap checks."""
    domain = column.domain()
    match cell:
        case BoolLiteral(value):
            return frozenset((value,))
        case ValueLiteral(value):
            return frozenset((value,))
        case ValueSet(values):
            return frozenset(values)
        case Comparison() | Range():
            return frozenset(element for element in domain if cell.holds(element))
    return domain


def rows_overlap(table: DecisionTable, first: RuleRow, second: RuleRow) -> bool:
    return all(
        cell_domain(a, column) & cell_domain(b, column)
        for column, a, b in zip(table.inputs, first.inputs, second.inputs)
    )


def _diagnostic(severity, code, message, table, span=None):
    return Diagnostic(severity, code, message, span or table.span, table.name)


def _check_structure(table: DecisionTable):
    if table.policy is not HitPolicy.CHOICE:
        return
    if table.value_row is None:
        yield _diagnostic(Severity.ERROR, "ChoiceStructure", "a Ch table needs an output-value row", table)
    if len(table.outputs) != 1:
        yield _diagnostic(Severity.ERROR, "ChoiceStructure", "a Ch table has exactly one output column", table)


def _check_choice_sums(table: DecisionTable):
    if table.policy is not HitPolicy.CHOICE or table.value_row is None:
        return
    for index, row in enumerate(table.rows, start=1):
        total = sum(
            (cell.probability.value for cell in row.outputs if isinstance(cell, ProbabilityLiteral)),
            Fraction(0),
        )
        if total > 1:
            yield _diagnostic(
                Severity.ERROR,
                "ChoiceSumExceeded",
                f"row {index} assigns total probability {format_fraction(total)} > 1",
                table,
                row.span,
            )


def _check_multivalued(table: DecisionTable):
    if table.policy is HitPolicy.CHOICE or not table.probabilistic:
        return
    for column in table.outputs:
        if column.is_function:
            yield _diagnostic(
                Severity.WARNING,
                "MultiValuedFunction",
                f"{column.target.raw_name!r} gets probabilistic values outside a Ch table; "
                "an outcome may give it several values at once",
                table,
                column.span,
            )


def _check_overlaps(table: DecisionTable):
    if table.policy is HitPolicy.FIRST:
        return
    for (i, first), (j, second) in combinations(enumerate(table.rows, start=1), 2):
        if not rows_overlap(table, first, second):
            continue
        if table.policy is HitPolicy.ANY:
            if first.outputs != second.outputs:
                yield _diagnostic(
                    Severity.ERROR,
                    "AnyConflict",
                    f"rows {i} and {j} overlap but disagree on their outputs",
                    table,
                    second.span,
                )
        elif table.policy is HitPolicy.UNIQUE:
            yield _diagnostic(Severity.WARNING, "UniqueOverlap", f"rows {i} and {j} can both apply", table, second.span)
        else:
            yield _diagnostic(
                Severity.WARNING,
                "ChoiceOverlap",
                f"rows {i} and {j} can both apply; each makes its own choice",
                table,
                second.span,
            )


def defined_symbols(model: PdmnModel) -> set:
    defined = {column.target for table in model.tables for column in table.outputs}
    defined.update(entry.target for facts in model.facts for entry in facts.rows)
    return defined


def validate_model(model: PdmnModel) -> list[Diagnostic]:
    """Check a parsed model; problems come back as diagnostics in document order."""
    diagnostics = []
    defined = defined_symbols(model)
    reported = set()
    for table in model.tables:
        diagnostics.extend(_check_structure(table))
        diagnostics.extend(_check_choice_sums(table))
        diagnostics.extend(_check_multivalued(table))
        diagnostics.extend(_check_overlaps(table))
        for column in table.inputs:
            if column.target in defined or column.target in reported:
                continue
            reported.add(column.target)
            diagnostics.append(
                _diagnostic(
                    Severity.WARNING,
                    "UndefinedInput",
                    f"{column.target.mangled} is used as an input but no table or fact defines it; it is always false",
                    table,
                    column.span,
                )
            )
    logging.info(f"Validated model {model.name!r}: {len(diagnostics)} diagnostic(s)")
    return diagnostics
