"""
Translation of a validated pDMN model into a ProbLog-subset program.

Each decision-table row becomes rules whose body is the row's input
conditions plus one type atom per quantifier letter. Rows concluding No are
closed-world and produce nothing, First-hit tables go through row atoms, and
Ch tables become annotated disjunctions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import product

from modules.model import (
    BoolLiteral,
    ColumnHeader,
    Comparison,
    DecisionTable,
    DontCare,
    FunctionAtom,
    FunctionDecl,
    Glossary,
    HitPolicy,
    PdmnModel,
    ProbabilityLiteral,
    QuerySet,
    Range,
    RuleRow,
    TypeDecl,
    ValueLiteral,
    ValueSet,
    VarRef,
    mangle_element,
    mangle_name,
)
from modules.logic import AnnotatedDisjunction, Atom, Clause, Constant, Literal, LogicProgram, Query, Statement, Variable

FACTS_SECTION = "facts"


@dataclass(frozen=True)
class Provenance:
    """Where a statement came from: a section (table name or 'facts') and a 1-based row."""

    section: str
    row: int | None = None
    synthetic: bool = False


@dataclass(frozen=True)
class TranslationOutput:
    program: LogicProgram
    symbol_table: dict
    row_provenance: tuple[tuple[Statement, Provenance], ...]

    def provenance_of(self, position: int) -> Provenance:
        return self.row_provenance[position][1]


def _term(binding):
    if isinstance(binding, VarRef):
        return Variable(binding.letter)
    return Constant(mangle_element(binding))


def _atom(target, args, value=None) -> Atom:
    terms = tuple(_term(arg) for arg in args)
    if isinstance(target, FunctionDecl):
        terms += (_term(value),)
    return Atom(target.mangled, terms)


def _column_atom(column: ColumnHeader, value=None) -> Atom:
    return _atom(column.target, column.bindings, value)


def _type_atoms(letters: dict[str, TypeDecl]) -> tuple[Literal, ...]:
    return tuple(Literal(Atom(arg_type.mangled, (Variable(letter),))) for letter, arg_type in letters.items())


def _cell_alternatives(cell, column: ColumnHeader):
    """The concrete cells an input cell stands for; Comparison, Range and ValueSet expand to elements."""
    match cell:
        case ValueSet(values):
            return [ValueLiteral(value) for value in values]
        case Comparison() | Range():
            return [ValueLiteral(element) for element in column.value_type.elements if cell.holds(element)]
    return [cell]


def _condition(column: ColumnHeader, cell) -> Literal | None:
    match cell:
        case DontCare():
            return None
        case BoolLiteral(value):
            return Literal(_column_atom(column), negated=not value)
        case ValueLiteral(value):
            return Literal(_column_atom(column, value))
        case VarRef():
            return Literal(_column_atom(column, cell))
    raise TypeError(f"{cell!r} cannot be an input condition")


def _row_bodies(table: DecisionTable, row: RuleRow) -> list[tuple[Literal, ...]]:
    """One body per expansion of the row's input cells, type atoms last."""
    letters = {**table.variables(), **table.row_variables(row)}
    types = _type_atoms(letters)
    choices = [_cell_alternatives(cell, column) for column, cell in zip(table.inputs, row.inputs)]
    bodies = []
    for cells in product(*choices):
        conditions = [_condition(column, cell) for column, cell in zip(table.inputs, cells)]
        bodies.append(tuple(literal for literal in conditions if literal is not None) + types)
    return bodies


def _row_outputs(table: DecisionTable, row: RuleRow):
    """(head atom, probability or None) for every output the row concludes."""
    outputs = []
    for slot, column in table.output_slots():
        if table.probabilistic:
            cell = row.outputs[slot]
            probability = cell.probability if isinstance(cell, ProbabilityLiteral) else None
            if probability is None or probability.value == 0:
                continue
            value = table.value_row[slot]
            if probability.value == 1:
                probability = None
        else:
            value, probability = row.outputs[slot], None
        match value:
            case BoolLiteral(True):
                outputs.append((_column_atom(column), probability))
            case ValueLiteral(element):
                outputs.append((_column_atom(column, element), probability))
            case VarRef():
                outputs.append((_column_atom(column, value), probability))
    return outputs


def translate_type(decl: TypeDecl) -> list[Clause]:
    return [Clause(Atom(decl.mangled, (Constant(mangle_element(element)),))) for element in decl.elements]


def translate_u_table(table: DecisionTable) -> list[tuple[Statement, int]]:
    """Unique and Any tables: one clause per row, expansion and concluded output."""
    statements = []
    for index, row in enumerate(table.rows, start=1):
        outputs = _row_outputs(table, row)
        for body in _row_bodies(table, row):
            for head, probability in outputs:
                statements.append((Clause(head, body, probability), index))
    return statements


def row_atom(table: DecisionTable, index: int) -> Atom:
    letters = tuple(Variable(letter) for letter in table.variables())
    return Atom(f"{mangle_name(table.name)}_r{index}", letters)


def translate_f_table(table: DecisionTable) -> list[tuple[Statement, int, bool]]:
    """
    First-hit tables: row i fires as `<table>_r<i>`, and its outputs hold only
    when no earlier row fired. Row atoms after the last concluding row are
    left out since nothing refers to them.
    """
    if len(table.rows) == 1:
        return [(statement, index, False) for statement, index in translate_u_table(table)]
    outputs = [_row_outputs(table, row) for row in table.rows]
    concluding = [index for index, row_outputs in enumerate(outputs, start=1) if row_outputs]
    if not concluding:
        return []
    last = concluding[-1]
    types = _type_atoms(table.variables())

    statements = []
    for index, row in enumerate(table.rows[:last], start=1):
        for body in _row_bodies(table, row):
            statements.append((Clause(row_atom(table, index), body), index, True))
    for index in concluding:
        guard = (Literal(row_atom(table, index)),) + tuple(
            Literal(row_atom(table, earlier), negated=True) for earlier in range(1, index)
        )
        for head, probability in outputs[index - 1]:
            statements.append((Clause(head, guard + types, probability), index, False))
    return statements


def translate_ch_table(table: DecisionTable) -> list[tuple[Statement, int]]:
    """Choice tables: each row picks at most one of the output-value row's values."""
    statements = []
    for index, row in enumerate(table.rows, start=1):
        alternatives = tuple((probability, head) for head, probability in _choice_alternatives(table, row))
        if not alternatives:
            continue
        for body in _row_bodies(table, row):
            if len(alternatives) == 1 and alternatives[0][0].value == 1:
                statements.append((Clause(alternatives[0][1], body), index))
            else:
                statements.append((AnnotatedDisjunction(alternatives, body), index))
    return statements


def _choice_alternatives(table: DecisionTable, row: RuleRow):
    for slot, column in table.output_slots():
        cell = row.outputs[slot]
        if not isinstance(cell, ProbabilityLiteral) or cell.probability.value == 0:
            continue
        match table.value_row[slot]:
            case BoolLiteral(True):
                yield _column_atom(column), cell.probability
            case ValueLiteral(element):
                yield _column_atom(column, element), cell.probability


def _query_domain(entry) -> tuple[Literal, ...]:
    letters = {}
    for binding, arg_type in zip(entry.args, entry.target.arg_types):
        if isinstance(binding, VarRef):
            letters.setdefault(binding.letter, arg_type)
    if isinstance(entry, FunctionAtom) and isinstance(entry.value, VarRef):
        letters.setdefault(entry.value.letter, entry.target.range_type)
    return _type_atoms(letters)


def translate_queries(queries: QuerySet, glossary: Glossary) -> list[Query]:
    """One query per entry; variables get their type atoms as grounding domain."""
    translated = []
    for entry in queries.entries:
        value = entry.value if isinstance(entry, FunctionAtom) else None
        translated.append(Query(_atom(entry.target, entry.args, value), _query_domain(entry)))
    return translated


def _table_statements(table: DecisionTable):
    if table.policy is HitPolicy.FIRST:
        return translate_f_table(table)
    if table.policy is HitPolicy.CHOICE:
        return [(statement, index, False) for statement, index in translate_ch_table(table)]
    return [(statement, index, False) for statement, index in translate_u_table(table)]


def translate_model(model: PdmnModel) -> TranslationOutput:
    """Translate a model whose validation raised no errors."""
    glossary = model.glossary
    statements: list[tuple[Statement, Provenance]] = []
    for decl in glossary.types:
        statements.extend((fact, Provenance(FACTS_SECTION, synthetic=True)) for fact in translate_type(decl))
    for facts in model.facts:
        for index, entry in enumerate(facts.rows, start=1):
            value = entry.value if isinstance(entry, FunctionAtom) else None
            statements.append((Clause(_atom(entry.target, entry.args, value)), Provenance(FACTS_SECTION, index)))
    for table in model.tables:
        statements.extend(
            (statement, Provenance(table.name, index, synthetic))
            for statement, index, synthetic in _table_statements(table)
        )

    queries = translate_queries(model.queries, glossary)
    symbol_table = {decl: (decl.mangled, decl.logic_arity) for decl in glossary.symbols}
    symbol_table.update({decl: (decl.mangled, 1) for decl in glossary.types})
    program = LogicProgram(tuple(statement for statement, _ in statements), tuple(queries))
    logging.info(f"Translated model {model.name!r} into {len(program.statements)} statements and {len(queries)} queries")
    return TranslationOutput(program, symbol_table, tuple(statements))
