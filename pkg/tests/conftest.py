import os

import pytest
from typer.testing import CliRunner

from modules.tableparse import parse_workbook

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
FIXTURES_DIR = os.path.join(TESTS_DIR, "fixtures")
GOLDEN_DIR = os.path.join(TESTS_DIR, "golden")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES_DIR, f"{name}.pdmn")


def read_fixture(name: str) -> str:
    with open(fixture_path(name), "r", encoding="utf-8") as file:
        return file.read()


def read_golden(name: str) -> str:
    with open(os.path.join(GOLDEN_DIR, f"{name}.pl"), "r", encoding="utf-8") as file:
        return file.read()


def normalized_lines(text: str) -> list[str]:
    """Lines with whitespace runs collapsed and blank lines dropped."""
    return [" ".join(line.split()) for line in text.splitlines() if line.strip()]


def make_runner() -> CliRunner:
    # click 8.2 dropped mix_stderr and always keeps the streams apart
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


@pytest.fixture
def load_model():
    def load(name: str, model_name=None):
        return parse_workbook(read_fixture(name), fixture_path(name), model_name)

    return load


@pytest.fixture
def runner():
    return make_runner()
