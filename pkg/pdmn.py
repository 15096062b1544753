import json
import logging
import sys
from dataclasses import replace
from typing import List, Optional

import typer

from modules.config import CONFIG
from modules.emit import emit_translation
from modules.errors import EngineError, PdmnError
from modules.logging import setup_logging
from modules.model import PdmnModel, QuerySet, validate_model
from modules.plcore import query_exact
from modules.tableparse import parse_query_cell, parse_workbook
from modules.translate import translate_model

EXIT_VALIDATION = 1
EXIT_PARSE = 2
EXIT_ENGINE = 3

app = typer.Typer(help="Compile pDMN workbooks to ProbLog and compute exact query probabilities.")

WORKBOOK = typer.Argument(..., help="Workbook file, or - to read standard input")
MODEL = typer.Option(None, "--model", help="Model to use when the workbook holds several")
QUERY = typer.Option(None, "--query", help="Query cell replacing the workbook's Query table (repeatable)")
AS_JSON = typer.Option(False, "--json", help="Machine-readable output")


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log pipeline progress to stderr")):
    """pDMN compiler and exact inference engine."""
    setup_logging(CONFIG["LOG_DIR"], CONFIG["LOG_FILE"], verbose)


def read_source(workbook: str) -> str:
    if workbook == "-":
        return sys.stdin.read()
    try:
        with open(workbook, "r", encoding=CONFIG["ENCODING"]) as file:
            return file.read()
    except OSError as error:
        typer.echo(f"error: cannot read {workbook}: {error.strerror}", err=True)
        raise typer.Exit(code=EXIT_PARSE)


def load_model(workbook: str, model_name: Optional[str], queries: Optional[List[str]]) -> PdmnModel:
    """Parse the workbook, swapping in command-line queries when given."""
    file = "<stdin>" if workbook == "-" else workbook
    try:
        model = parse_workbook(read_source(workbook), file, model_name)
        if queries:
            entries = tuple(parse_query_cell(text, model.glossary) for text in queries)
            model = replace(model, queries=QuerySet(entries))
    except PdmnError as error:
        typer.echo(error.format(), err=True)
        raise typer.Exit(code=EXIT_PARSE)
    logging.info(f"Loaded model {model.name!r} from {file}")
    return model


def report(model: PdmnModel, diagnostics, as_json: bool, results=(), digits=None, err=False):
    if as_json:
        payload = {
            "model": model.name,
            "results": [result.to_dict(digits) for result in results],
            "diagnostics": [diagnostic.to_dict() for diagnostic in diagnostics],
        }
        typer.echo(json.dumps(payload, indent=2))
        return
    for diagnostic in diagnostics:
        typer.echo(diagnostic.format(), err=err)
    for result in results:
        typer.echo(result.render(digits))


def validated(model: PdmnModel, as_json: bool):
    """Diagnostics of a model; exits with the validation code when any is an Error."""
    diagnostics = validate_model(model)
    if any(diagnostic.is_error for diagnostic in diagnostics):
        report(model, diagnostics, as_json, err=True)
        raise typer.Exit(code=EXIT_VALIDATION)
    return diagnostics


@app.command()
def check(
    workbook: str = WORKBOOK,
    model_name: Optional[str] = MODEL,
    query: Optional[List[str]] = QUERY,
    as_json: bool = AS_JSON,
):
    """Parse and validate a workbook and print its diagnostics."""
    model = load_model(workbook, model_name, query)
    diagnostics = validate_model(model)
    report(model, diagnostics, as_json)
    errors = sum(1 for diagnostic in diagnostics if diagnostic.is_error)
    if not as_json:
        typer.echo(f"{model.name}: {errors} error(s), {len(diagnostics) - errors} warning(s)")
    if errors:
        raise typer.Exit(code=EXIT_VALIDATION)


@app.command()
def emit(
    workbook: str = WORKBOOK,
    model_name: Optional[str] = MODEL,
    query: Optional[List[str]] = QUERY,
):
    """Print the ProbLog translation of a workbook."""
    model = load_model(workbook, model_name, query)
    for diagnostic in validated(model, as_json=False):
        typer.echo(diagnostic.format(), err=True)
    typer.echo(emit_translation(translate_model(model)), nl=False)


@app.command()
def run(
    workbook: str = WORKBOOK,
    model_name: Optional[str] = MODEL,
    query: Optional[List[str]] = QUERY,
    as_json: bool = AS_JSON,
    max_choice_points: int = typer.Option(
        CONFIG["MAX_CHOICE_POINTS"],
        "--max-choice-points",
        envvar="PDMN_MAX_CHOICE_POINTS",
        min=0,
        help="Refuse to enumerate more independent choice points than this",
    ),
    digits: Optional[int] = typer.Option(None, "--digits", min=0, help="Round probabilities to this many decimals"),
    threads: int = typer.Option(1, "--threads", min=1, help="Worker processes for the enumeration"),
):
    """Compute the exact probability of every query of a workbook."""
    model = load_model(workbook, model_name, query)
    diagnostics = validated(model, as_json)
    if not as_json:
        for diagnostic in diagnostics:
            typer.echo(diagnostic.format(), err=True)
    translation = translate_model(model)
    try:
        results = query_exact(translation.program, max_choice_points, threads)
    except EngineError as error:
        typer.echo(error.format(), err=True)
        raise typer.Exit(code=EXIT_ENGINE)
    report(model, diagnostics if as_json else (), as_json, results, digits)


if __name__ == "__main__":
    app()
