"""Exact numbers: probabilities, numeric elements and their decimal rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from modules.errors import CellSyntaxError, InvalidProbability

NUMBER_PATTERN = re.compile(r"-?(?:\d+(?:\.\d*)?|\.\d+)")
FRACTION_PATTERN = re.compile(r"(-?\d+)\s*/\s*(\d+)")


def parse_number(text: str) -> Fraction | None:
    """Parse an integer or decimal literal exactly, or return None."""
    text = text.strip()
    if not NUMBER_PATTERN.fullmatch(text):
        return None
    return Fraction(text)


def terminating_places(value: Fraction) -> int | None:
    """Number of decimal places needed to write value exactly, None if it repeats."""
    denominator = value.denominator
    twos = fives = 0
    while denominator % 2 == 0:
        denominator //= 2
        twos += 1
    while denominator % 5 == 0:
        denominator //= 5
        fives += 1
    if denominator != 1:
        return None
    return max(twos, fives)


def _fixed(value: Fraction, places: int) -> str:
    scaled = round(value * 10**places)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(places + 1, "0")
    if places == 0:
        return f"{sign}{digits}"
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def format_fraction(value: Fraction, digits: int | None = None) -> str:
    """
    Render an exact rational as text.

    With digits, round half-even to that many decimal places. Without, give the
    shortest exact decimal, falling back to p/q for repeating expansions.
    """
    if digits is not None:
        return _fixed(value, digits)
    places = terminating_places(value)
    if places is None:
        return f"{value.numerator}/{value.denominator}"
    return _fixed(value, places)


def format_decimal(value: Fraction, digits: int | None, default_places: int) -> str:
    """Always-decimal rendering: exact when it terminates, else rounded."""
    if digits is not None:
        return _fixed(value, digits)
    places = terminating_places(value)
    if places is None:
        return _fixed(value, default_places)
    return _fixed(value, places)


@dataclass(frozen=True)
class Probability:
    """An exact probability that remembers whether it was written as p/q."""

    value: Fraction
    fractional: bool = False

    def __post_init__(self):
        if not 0 <= self.value <= 1:
            raise InvalidProbability(f"probability {self.value} is outside [0, 1]")

    @classmethod
    def of(cls, value) -> Probability:
        return cls(Fraction(value))

    def complement(self) -> Fraction:
        return 1 - self.value

    def render(self) -> str:
        if self.fractional and self.value.denominator != 1:
            return f"{self.value.numerator}/{self.value.denominator}"
        return format_fraction(self.value)

    def __str__(self):
        return self.render()


def parse_probability(text: str) -> Probability:
    """Parse `p/q` or a decimal into an exact probability."""
    text = text.strip()
    match = FRACTION_PATTERN.fullmatch(text)
    if match:
        numerator, denominator = int(match.group(1)), int(match.group(2))
        if denominator == 0:
            raise InvalidProbability(f"probability {text!r} divides by zero")
        value = Fraction(numerator, denominator)
        return Probability(value, fractional=value.denominator != 1)
    value = parse_number(text)
    if value is None:
        raise CellSyntaxError(f"{text!r} is not a probability")
    return Probability(value)


def looks_like_probability(text: str) -> bool:
    text = text.strip()
    return text in ("", "-") or bool(FRACTION_PATTERN.fullmatch(text) or NUMBER_PATTERN.fullmatch(text))
