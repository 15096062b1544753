from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

from jinja2 import Environment, Template

from modules.config import CONFIG
from modules.logic import LogicProgram


@dataclass
class Section:
    title: str | None
    statements: list[str] = field(default_factory=list)


@lru_cache(maxsize=None)
def load_template(template_file: str) -> Template:
    with open(template_file, "r", encoding=CONFIG["ENCODING"]) as file:
        template_content = file.read()

    env = Environment(
        trim_blocks=True,
        lstrip_blocks=True,
    )
    return env.from_string(template_content)


def _sections(program: LogicProgram, provenance) -> list[Section]:
    if provenance is None:
        return [Section(None, [str(statement) for statement in program.statements])] if program.statements else []
    sections: list[Section] = []
    for statement, origin in provenance:
        if not sections or sections[-1].title != origin.section:
            sections.append(Section(origin.section))
        sections[-1].statements.append(str(statement))
    return sections


def emit_program(program: LogicProgram, provenance=None, template_file: str | None = None) -> str:
    """
    Render a program as ProbLog source, one statement per line.

    With provenance (pairs of statement and origin, as produced by the
    translator) every run of statements from the same table is headed by a
    `% <table>` comment.

    Args:
        program (LogicProgram): Program to render.
        provenance (Sequence[tuple[Statement, Provenance]] | None): Origin of each statement, in statement order.
        template_file (str | None): Jinja2 template to render with, CONFIG["TEMPLATE_FILE"] when None.

    Returns:
        str: ProbLog source text.
    """
    template = load_template(template_file or CONFIG["TEMPLATE_FILE"])
    text = template.render(sections=_sections(program, provenance), queries=[str(query) for query in program.queries])
    logging.info(f"Emitted {len(program.statements)} statements and {len(program.queries)} queries")
    return text


def emit_translation(output) -> str:
    return emit_program(output.program, output.row_provenance)
