"""
Reader for the canonical textual pDMN workbook format.

A workbook is a UTF-8 text file of tables. Each table starts with a header
line `<kind> "<Name>" [<policy>]` and continues with pipe-delimited rows; in
decision tables `||` separates the input columns from the output columns.
See README.md for the grammar.
"""

from __future__ import annotations

import logging
import os
import re
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

from modules.config import CONFIG
from modules.errors import (
    CellSyntaxError,
    DuplicateDecl,
    InvalidName,
    NonGroundFact,
    NotAFunction,
    PdmnError,
    SourceSpan,
    TableSyntaxError,
    TypeMismatch,
    UnknownElement,
    UnknownPolicy,
    UnknownSymbol,
    WorkbookParseError,
)
from modules.model import (
    BoolLiteral,
    Comparison,
    DecisionTable,
    DontCare,
    FactTable,
    FunctionAtom,
    Glossary,
    HitPolicy,
    PdmnModel,
    PredicateAtom,
    ProbabilityLiteral,
    QuerySet,
    Range,
    RuleRow,
    Side,
    TypeDecl,
    ValueLiteral,
    ValueSet,
    VarRef,
    declare_function,
    declare_predicate,
    format_element,
    fresh_letters,
    is_quantifier,
    mangle_name,
    parse_element_literal,
    render_cell,
    render_entry,
    render_header,
    resolve_header,
)
from modules.rational import Probability, looks_like_probability, parse_number, parse_probability

TABLE_KINDS = ("model", "type", "predicate", "function", "decision", "fact", "query")
DEFAULT_TABLE_NAMES = {
    "type": "Type",
    "predicate": "Predicate",
    "function": "Function",
    "fact": "Facts",
    "query": "Query",
}

_TABLE_HEADER = re.compile(
    r'(?P<kind>[A-Za-z]+)(?:\s+"(?P<name>[^"]*)")?(?:\s+(?P<policy>[^\s"]+))?\s*',
)
_COMPARISON = re.compile(r"(<=|>=|≤|≥|<|>)\s*(\S+)")
_RANGE = re.compile(r"\[\s*(\S+?)\s*\.\.\s*(\S+?)\s*\]")
_OPERATORS = {"≤": "<=", "≥": ">="}


@dataclass
class RawCell:
    text: str
    span: SourceSpan


@dataclass
class RawRow:
    cells: list[RawCell]
    separator: int | None
    span: SourceSpan


@dataclass
class RawTable:
    kind: str
    name: str | None
    policy: HitPolicy | None
    span: SourceSpan
    grid: list[RawRow] = field(default_factory=list)

    @property
    def input_count(self) -> int | None:
        return self.grid[0].separator if self.grid else None


@dataclass
class RawModel:
    name: str | None
    span: SourceSpan | None
    tables: list[RawTable] = field(default_factory=list)


@dataclass(frozen=True)
class CellContext:
    """What a cell is checked against: its column's value type and position."""

    value_type: TypeDecl | None
    side: Side = Side.INPUT
    probabilistic: bool = False


# --- Cells


def _number(text: str, what: str):
    value = parse_number(text)
    if value is None:
        raise TypeMismatch(f"{what} needs a number, got {text!r}")
    return value


def _require_numeric(context: CellContext, text: str):
    if context.value_type is None or not context.value_type.numeric:
        raise TypeMismatch(f"{text!r} compares numbers, but the column is not numeric")


def _element(text: str, context: CellContext):
    element = context.value_type.parse_element(text)
    if element is None:
        raise UnknownElement(f"{text!r} is not an element of {context.value_type.name}")
    return element


def parse_cell(text: str, context: CellContext):
    """Parse one decision-table cell in the context of its column."""
    text = text.strip()
    if context.probabilistic:
        if text in ("", "-"):
            return ProbabilityLiteral(Probability.of(0))
        return ProbabilityLiteral(parse_probability(text))
    if text in ("", "-"):
        return DontCare()
    if context.value_type is None:
        if text.lower() in ("yes", "no"):
            return BoolLiteral(text.lower() == "yes")
        raise TypeMismatch(f"a predicate column takes Yes, No or -, got {text!r}")

    comparison = _COMPARISON.fullmatch(text)
    if comparison:
        _require_numeric(context, text)
        op = _OPERATORS.get(comparison.group(1), comparison.group(1))
        return Comparison(op, _number(comparison.group(2), "a comparison"))
    bounds = _RANGE.fullmatch(text)
    if bounds:
        _require_numeric(context, text)
        lo, hi = _number(bounds.group(1), "a range"), _number(bounds.group(2), "a range")
        if lo > hi:
            raise CellSyntaxError(f"range {text!r} is empty")
        return Range(lo, hi)
    if "," in text:
        if context.side is Side.OUTPUT:
            raise CellSyntaxError(f"value lists like {text!r} are only allowed in input cells")
        values = [_element(part.strip(), context) for part in text.split(",")]
        if len(values) < 2:
            raise CellSyntaxError(f"value list {text!r} needs at least two values")
        return ValueSet(tuple(values))
    if is_quantifier(text):
        return VarRef(text)
    return ValueLiteral(_element(text, context))


def _fresh_letter(used) -> str:
    letters = fresh_letters(used)
    if not letters:
        raise TypeMismatch("no quantifier letter left for an implicit variable")
    return letters[0]


def parse_query_cell(text: str, glossary: Glossary, span=None):
    """Parse a Query-table cell: `X is infected`, `vaccine of bob`, `die value = six`."""
    if "=" in text:
        lhs, rhs = text.split("=", 1)
        rhs = rhs.strip()
        reserved = {rhs} if is_quantifier(rhs) else set()
        header = resolve_header(lhs, glossary, Side.INPUT, reserved, span)
        if not header.is_function:
            raise NotAFunction(f"{header.target.raw_name!r} is a predicate and has no value", span)
        range_type = header.target.range_type
        used = {binding.letter for binding in header.bindings if isinstance(binding, VarRef)}
        if is_quantifier(rhs):
            for binding, arg_type in zip(header.bindings, header.target.arg_types):
                if isinstance(binding, VarRef) and binding.letter == rhs and arg_type != range_type:
                    raise TypeMismatch(f"{rhs} stands for {arg_type.name} and for {range_type.name} in {text!r}", span)
            value = VarRef(rhs)
        elif rhs == range_type.name:
            value = VarRef(_fresh_letter(used))
        else:
            value = range_type.parse_element(rhs)
            if value is None:
                raise UnknownElement(f"{rhs!r} is not an element of {range_type.name}", span)
        return FunctionAtom(header.target, header.bindings, value, span)

    header = resolve_header(text, glossary, Side.INPUT, span=span)
    if header.is_function:
        used = {binding.letter for binding in header.bindings if isinstance(binding, VarRef)}
        return FunctionAtom(header.target, header.bindings, VarRef(_fresh_letter(used)), span)
    return PredicateAtom(header.target, header.bindings, span)


# --- Lines and rows


def _split_row(line: str, line_number: int, file: str) -> RawRow:
    """Split a `| a | b || c |` line into cells, remembering where `||` sits."""
    offset = len(line) - len(line.lstrip())
    content = line.strip()
    if not content.endswith("|") or content == "|":
        raise TableSyntaxError("row must end with |", SourceSpan(file, line_number, offset + 1, len(content)))
    cells = []
    separator = None
    i = 0
    while True:
        if content.startswith("||", i):
            if separator is not None:
                raise TableSyntaxError("row has more than one ||", SourceSpan(file, line_number, offset + i + 1, 2))
            separator = len(cells)
            i += 2
        else:
            i += 1
        if i >= len(content):
            break
        j = content.index("|", i)
        text = content[i:j]
        cells.append(RawCell(text.strip(), SourceSpan(file, line_number, offset + i + 1, len(text))))
        i = j
    return RawRow(cells, separator, SourceSpan(file, line_number, offset + 1, len(content)))


def read_raw_models(source: str, file: str) -> tuple[list[RawModel], list[PdmnError]]:
    """Group the lines of a workbook into models and raw tables."""
    models = [RawModel(None, None)]
    errors = []
    table = None
    for line_number, line in enumerate(source.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        column = len(line) - len(line.lstrip()) + 1
        span = SourceSpan(file, line_number, column, len(stripped))
        if stripped.startswith("|"):
            if table is None:
                errors.append(TableSyntaxError("row outside of a table", span))
                continue
            try:
                table.grid.append(_split_row(line, line_number, file))
            except PdmnError as error:
                errors.append(error)
            continue

        match = _TABLE_HEADER.fullmatch(stripped)
        if not match or match.group("kind").lower() not in TABLE_KINDS:
            errors.append(TableSyntaxError(f"malformed table header {stripped!r}", span))
            table = None
            continue
        kind, name, policy_text = match.group("kind").lower(), match.group("name"), match.group("policy")

        if kind == "model":
            if policy_text:
                errors.append(TableSyntaxError("a model line takes only a name", span))
            current = models[-1]
            if current.tables or current.name is not None:
                models.append(RawModel(name, span))
            else:
                current.name, current.span = name, span
            table = None
            continue

        policy = None
        if kind == "decision":
            if not name:
                errors.append(TableSyntaxError("decision table needs a name", span))
            if policy_text is None:
                errors.append(TableSyntaxError("decision table needs a hit policy (U, A, F or Ch)", span))
                table = None
                continue
            policy = HitPolicy.parse(policy_text)
            if policy is None:
                errors.append(UnknownPolicy(f"unknown hit policy {policy_text!r}", span))
                table = None
                continue
        elif policy_text is not None:
            errors.append(TableSyntaxError(f"{kind} tables take no hit policy", span))
        table = RawTable(kind, name or DEFAULT_TABLE_NAMES.get(kind, ""), policy, span)
        models[-1].tables.append(table)
    return models, errors


# --- Models


def check_row_atoms(table: DecisionTable, declared: set, span: SourceSpan):
    """First-hit row atoms `<table>_r<i>` must not name a declared symbol of the same arity."""
    arity = len(table.variables())
    for index in range(1, len(table.rows) + 1):
        name = f"{mangle_name(table.name)}_r{index}"
        if (name, arity) in declared:
            message = f"row {index} of F table {table.name!r} would be named {name}, which is already declared"
            raise DuplicateDecl(message, span)


class _ModelBuilder:
    def __init__(self, raw: RawModel, name: str, file: str):
        self.raw = raw
        self.name = name
        self.file = file
        self.errors: list[PdmnError] = []

    @contextmanager
    def collecting(self, span):
        try:
            yield
        except PdmnError as error:
            self.errors.append(error.with_span(span))

    def tables(self, kind):
        return [table for table in self.raw.tables if table.kind == kind]

    def body(self, table: RawTable, labels):
        """Check a glossary table's label row and return its well-formed rows."""
        if not table.grid:
            self.errors.append(TableSyntaxError(f"{table.kind} table has no rows", table.span))
            return []
        header = table.grid[0]
        expected = "| " + " | ".join(labels) + " |"
        if [cell.text.lower() for cell in header.cells] != [label.lower() for label in labels] or header.separator is not None:
            self.errors.append(TableSyntaxError(f"expected the label row {expected}", header.span))
            return []
        rows = []
        for row in table.grid[1:]:
            if len(row.cells) != len(labels) or row.separator is not None:
                self.errors.append(TableSyntaxError(f"row does not match {expected}", row.span))
            else:
                rows.append(row)
        return rows

    def build(self) -> PdmnModel | None:
        if not self.raw.tables:
            self.errors.append(TableSyntaxError("no glossary Type table found", SourceSpan(self.file, 1, 1)))
            return None
        glossary = self.glossary()
        tables = self.decision_tables(glossary)
        facts = tuple(self.fact_table(table, glossary) for table in self.tables("fact"))
        queries = self.query_set(glossary)
        if self.errors:
            return None
        logging.info(f"Parsed model {self.name!r}: {len(glossary.types)} type(s), {len(glossary.symbols)} symbol(s), {len(tables)} decision table(s)")
        return PdmnModel(self.name, glossary, tables, facts, queries)

    def glossary(self) -> Glossary:
        types: dict[str, TypeDecl] = {}
        taken: dict[tuple[str, int], str] = {}

        def claim(mangled, arity, what, span):
            if (mangled, arity) in taken:
                raise DuplicateDecl(f"{what} clashes with {taken[mangled, arity]!r} as {mangled}/{arity}", span)
            taken[mangled, arity] = what

        for table in self.tables("type"):
            for row in self.body(table, ("Name", "Elements")):
                name_cell, elements_cell = row.cells
                with self.collecting(row.span):
                    name = name_cell.text
                    if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", name) or is_quantifier(name):
                        raise InvalidName(f"type name {name!r} must be one word that is not a single capital", name_cell.span)
                    elements = []
                    for part in elements_cell.text.split(","):
                        element = parse_element_literal(part.strip())
                        if element is None:
                            raise TableSyntaxError(f"invalid element {part.strip()!r}", elements_cell.span)
                        elements.append(element)
                    decl = TypeDecl(name, tuple(elements), row.span)
                    claim(decl.mangled, 1, name, name_cell.span)
                    types[name] = decl

        predicates, functions = [], []
        for table in self.tables("predicate"):
            for row in self.body(table, ("Name",)):
                with self.collecting(row.span):
                    decl = declare_predicate(row.cells[0].text, types, row.span)
                    claim(decl.mangled, decl.logic_arity, decl.raw_name, row.span)
                    predicates.append(decl)
        for table in self.tables("function"):
            for row in self.body(table, ("Name", "Type")):
                name_cell, type_cell = row.cells
                with self.collecting(row.span):
                    if type_cell.text not in types:
                        raise UnknownSymbol(f"function range {type_cell.text!r} is not a declared type", type_cell.span)
                    decl = declare_function(name_cell.text, types[type_cell.text], types, row.span)
                    claim(decl.mangled, decl.logic_arity, decl.raw_name, row.span)
                    functions.append(decl)
        return Glossary(tuple(types.values()), tuple(predicates), tuple(functions))

    def decision_tables(self, glossary: Glossary) -> tuple[DecisionTable, ...]:
        tables = []
        names = set()
        first_hit_names = set()
        declared = {(decl.mangled, 1) for decl in glossary.types}
        declared.update((decl.mangled, decl.logic_arity) for decl in glossary.symbols)
        for raw in self.tables("decision"):
            with self.collecting(raw.span):
                if raw.name in names:
                    raise DuplicateDecl(f"a decision table named {raw.name!r} already exists", raw.span)
                names.add(raw.name)
                if raw.policy is HitPolicy.FIRST:
                    mangled = mangle_name(raw.name)
                    if mangled in first_hit_names:
                        raise DuplicateDecl(f"F table {raw.name!r} clashes with another F table as {mangled}", raw.span)
                    first_hit_names.add(mangled)
                table = self.decision_table(raw, glossary)
                if table is not None and table.policy is HitPolicy.FIRST and len(table.rows) > 1:
                    check_row_atoms(table, declared, raw.span)
                if table is not None:
                    tables.append(table)
        return tuple(tables)

    def decision_table(self, raw: RawTable, glossary: Glossary) -> DecisionTable | None:
        if not raw.grid:
            raise TableSyntaxError("decision table has no header row", raw.span)
        header, body = raw.grid[0], raw.grid[1:]
        if header.separator is None:
            raise TableSyntaxError("header row needs || between inputs and outputs", header.span)
        input_count = header.separator
        reserved = {token for cell in header.cells for token in cell.text.split() if is_quantifier(token)}

        inputs = []
        for cell in header.cells[:input_count]:
            if not cell.text:
                raise TableSyntaxError("input column header is empty", cell.span)
            inputs.append(resolve_header(cell.text, glossary, Side.INPUT, reserved, cell.span))
        merged = []
        for cell in header.cells[input_count:]:
            if cell.text:
                merged.append([cell, 1])
            elif merged:
                merged[-1][1] += 1
            else:
                raise TableSyntaxError("output column header is empty", cell.span)
        if not merged:
            raise TableSyntaxError("decision table needs an output column", header.span)
        outputs = [
            replace(resolve_header(cell.text, glossary, Side.OUTPUT, reserved, cell.span), width=width)
            for cell, width in merged
        ]

        letters = {}
        for column in inputs + outputs:
            for letter, arg_type in column.variables().items():
                if letters.setdefault(letter, arg_type) != arg_type:
                    raise TypeMismatch(f"{letter} ranges over both {letters[letter].name} and {arg_type.name}", column.span)

        width = len(header.cells)
        for row in body:
            if len(row.cells) != width or (row.separator is not None and row.separator != input_count):
                raise TableSyntaxError(f"row has {len(row.cells)} cells where the header has {width}", row.span)

        value_row = None
        if body and all(not cell.text for cell in body[0].cells[:input_count]):
            later = body[1:]
            if raw.policy is HitPolicy.CHOICE or (
                later and all(looks_like_probability(cell.text) for row in later for cell in row.cells[input_count:])
            ):
                value_row, body = body[0], later
        if raw.policy is HitPolicy.CHOICE:
            if value_row is None:
                raise TableSyntaxError("a Ch table needs an output-value row", header.span)
            if len(outputs) != 1:
                raise TableSyntaxError("a Ch table has exactly one output column", header.span)
        if value_row is None and any(column.width > 1 for column in outputs):
            raise TableSyntaxError("merged output columns need an output-value row", header.span)

        slot_columns = [column for _, column in _slots(outputs)]
        errors_before = len(self.errors)
        values = None
        if value_row is not None:
            values = []
            for column, cell in zip(slot_columns, value_row.cells[input_count:]):
                with self.collecting(cell.span):
                    if not cell.text:
                        raise TableSyntaxError("output-value row cell is empty", cell.span)
                    value = parse_cell(cell.text, CellContext(column.value_type, Side.OUTPUT))
                    if not isinstance(value, (BoolLiteral, ValueLiteral)):
                        raise CellSyntaxError(f"{cell.text!r} is not an output value", cell.span)
                    values.append(value)

        rows = []
        for row in body:
            input_cells, output_cells = [], []
            row_letters = {}
            for column, cell in zip(inputs, row.cells[:input_count]):
                with self.collecting(cell.span):
                    expr = parse_cell(cell.text, CellContext(column.value_type, Side.INPUT))
                    if isinstance(expr, VarRef):
                        known = letters.get(expr.letter, row_letters.get(expr.letter))
                        if known is not None and known != column.value_type:
                            raise TypeMismatch(f"{expr.letter} is used with two types", cell.span)
                        row_letters[expr.letter] = column.value_type
                    input_cells.append(expr)
            for column, cell in zip(slot_columns, row.cells[input_count:]):
                with self.collecting(cell.span):
                    expr = parse_cell(cell.text, CellContext(column.value_type, Side.OUTPUT, values is not None))
                    if isinstance(expr, VarRef):
                        bound = letters.get(expr.letter)
                        if bound is None and raw.policy in (HitPolicy.UNIQUE, HitPolicy.ANY):
                            bound = row_letters.get(expr.letter)
                        if bound is None:
                            raise TypeMismatch(f"{expr.letter} in an output cell is not bound by the inputs", cell.span)
                        if bound != column.value_type:
                            raise TypeMismatch(f"{expr.letter} is used with two types", cell.span)
                    output_cells.append(expr)
            rows.append(RuleRow(tuple(input_cells), tuple(output_cells), row.span))
        if len(self.errors) > errors_before:
            return None
        return DecisionTable(
            raw.name,
            raw.policy,
            tuple(inputs),
            tuple(outputs),
            tuple(values) if values is not None else None,
            tuple(rows),
            raw.span,
        )

    def entries(self, table: RawTable, glossary: Glossary):
        widths = {len(row.cells) for row in table.grid}
        if len(widths) > 1:
            self.errors.append(TableSyntaxError("rows have different numbers of cells", table.span))
        for row in table.grid:
            for cell in row.cells:
                if not cell.text:
                    continue
                entry = None
                with self.collecting(cell.span):
                    entry = parse_query_cell(cell.text, glossary, cell.span)
                if entry is not None:
                    yield cell, entry

    def fact_table(self, table: RawTable, glossary: Glossary) -> FactTable:
        rows = []
        for cell, entry in self.entries(table, glossary):
            if not entry.ground:
                self.errors.append(NonGroundFact(f"fact {cell.text!r} must name elements, and functions need '= value'", cell.span))
                continue
            rows.append(entry)
        return FactTable(table.name, tuple(rows), table.span)

    def query_set(self, glossary: Glossary) -> QuerySet:
        tables = self.tables("query")
        if not tables:
            return QuerySet.all_symbols(glossary)
        for extra in tables[1:]:
            self.errors.append(DuplicateDecl("a model has at most one Query table", extra.span))
        return QuerySet(tuple(entry for _, entry in self.entries(tables[0], glossary)))


def _slots(outputs):
    slot = 0
    for column in outputs:
        for _ in range(column.width):
            yield slot, column
            slot += 1


def _model_name(raw: RawModel, file: str) -> str:
    if raw.name:
        return raw.name
    if file in ("-", "<stdin>"):
        return CONFIG["STDIN_MODEL_NAME"]
    return os.path.splitext(os.path.basename(file))[0] or CONFIG["STDIN_MODEL_NAME"]


def parse_workbooks(source: str, file: str = "<workbook>") -> list[PdmnModel]:
    """Parse every model of a workbook; raise WorkbookParseError listing all problems."""
    raw_models, errors = read_raw_models(source, file)
    models = []
    for raw in raw_models:
        builder = _ModelBuilder(raw, _model_name(raw, file), file)
        model = builder.build()
        errors.extend(builder.errors)
        if model is not None:
            models.append(model)
    if errors:
        raise WorkbookParseError(errors)
    return models


def parse_workbook(source: str, file: str = "<workbook>", model_name: str | None = None) -> PdmnModel:
    """Parse a workbook and return one model, the named one if the file holds several."""
    models = parse_workbooks(source, file)
    if model_name is not None:
        for model in models:
            if model.name == model_name:
                return model
        available = ", ".join(model.name for model in models)
        raise WorkbookParseError([UnknownSymbol(f"no model named {model_name!r} (available: {available})", SourceSpan(file, 1, 1))])
    if len(models) > 1:
        available = ", ".join(model.name for model in models)
        raise WorkbookParseError([TableSyntaxError(f"workbook holds several models ({available}); pick one by name", SourceSpan(file, 1, 1))])
    return models[0]


# --- Rendering


def _row(inputs, outputs) -> str:
    left = "".join(f"| {text} " for text in inputs)
    return f"{left}|| {' | '.join(outputs)} |"


def render_table(table: DecisionTable) -> list[str]:
    lines = [f'decision "{table.name}" {table.policy.value}']
    outputs = []
    for column in table.outputs:
        outputs.append(render_header(column))
        outputs.extend([""] * (column.width - 1))
    lines.append(_row([render_header(column) for column in table.inputs], outputs))
    if table.value_row is not None:
        lines.append(_row([""] * len(table.inputs), [render_cell(cell) for cell in table.value_row]))
    for row in table.rows:
        lines.append(_row([render_cell(cell) for cell in row.inputs], [render_cell(cell) for cell in row.outputs]))
    return lines


def render_workbook(model: PdmnModel) -> str:
    """Write a model back out in the canonical workbook format."""
    glossary = model.glossary
    sections = []
    if glossary.types:
        sections.append(
            ['type "Type"', "| Name | Elements |"]
            + [f"| {decl.name} | {', '.join(format_element(element) for element in decl.elements)} |" for decl in glossary.types]
        )
    if glossary.predicates:
        sections.append(['predicate "Predicate"', "| Name |"] + [f"| {decl.raw_name} |" for decl in glossary.predicates])
    if glossary.functions:
        sections.append(
            ['function "Function"', "| Name | Type |"]
            + [f"| {decl.raw_name} | {decl.range_type.name} |" for decl in glossary.functions]
        )
    sections.extend(render_table(table) for table in model.tables)
    for facts in model.facts:
        sections.append([f'fact "{facts.name}"'] + [f"| {render_entry(entry)} |" for entry in facts.rows])
    if not model.queries.implicit_all:
        cells = " | ".join(render_entry(entry) for entry in model.queries.entries)
        sections.append(['query "Query"'] + ([f"| {cells} |"] if cells else []))
    lines = [f'model "{model.name}"']
    for section in sections:
        lines.append("")
        lines.extend(section)
    return "\n".join(lines) + "\n"
