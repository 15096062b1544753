"""
The ProbLog subset: terms, atoms, clauses, annotated disjunctions, queries,
and a reader for its textual form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from modules.errors import LogicSyntaxError, SourceSpan
from modules.rational import Probability, format_fraction


@dataclass(frozen=True)
class Constant:
    value: str | Fraction

    def __str__(self):
        if isinstance(self.value, Fraction):
            return format_fraction(self.value)
        return self.value


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self):
        return self.name


Term = Constant | Variable


@dataclass(frozen=True)
class Atom:
    symbol: str
    args: tuple[Term, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def key(self) -> tuple[str, int]:
        return self.symbol, self.arity

    @property
    def is_ground(self) -> bool:
        return not any(isinstance(arg, Variable) for arg in self.args)

    def variables(self):
        return [arg for arg in self.args if isinstance(arg, Variable)]

    def substitute(self, theta) -> Atom:
        if not theta:
            return self
        return Atom(self.symbol, tuple(theta.get(arg, arg) if isinstance(arg, Variable) else arg for arg in self.args))

    def __str__(self):
        if not self.args:
            return self.symbol
        return f"{self.symbol}({','.join(str(arg) for arg in self.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def substitute(self, theta) -> Literal:
        return Literal(self.atom.substitute(theta), self.negated)

    def __str__(self):
        return f"not({self.atom})" if self.negated else str(self.atom)


def _ordered_variables(atoms) -> list[Variable]:
    seen = {}
    for atom in atoms:
        for variable in atom.variables():
            seen.setdefault(variable, None)
    return list(seen)


def _render_body(body) -> str:
    return ", ".join(str(literal) for literal in body)


@dataclass(frozen=True)
class Clause:
    """A fact, probabilistic fact, rule or annotated rule."""

    head: Atom
    body: tuple[Literal, ...] = ()
    probability: Probability | None = None

    @property
    def is_fact(self) -> bool:
        return not self.body and self.probability is None

    @property
    def is_probabilistic_fact(self) -> bool:
        return not self.body and self.probability is not None

    @property
    def heads(self) -> tuple[Atom, ...]:
        return (self.head,)

    def variables(self) -> list[Variable]:
        return _ordered_variables([self.head] + [literal.atom for literal in self.body])

    def substitute(self, theta) -> Clause:
        return Clause(self.head.substitute(theta), tuple(literal.substitute(theta) for literal in self.body), self.probability)

    def __str__(self):
        text = str(self.head)
        if self.probability is not None:
            text = f"{self.probability}::{text}"
        if self.body:
            text = f"{text} :- {_render_body(self.body)}"
        return f"{text}."


@dataclass(frozen=True)
class AnnotatedDisjunction:
    alternatives: tuple[tuple[Probability, Atom], ...]
    body: tuple[Literal, ...] = ()

    def __post_init__(self):
        if not self.alternatives:
            raise ValueError("an annotated disjunction needs at least one alternative")
        if self.total > 1:
            raise LogicSyntaxError(f"annotated disjunction sums to {format_fraction(self.total)} > 1")

    @property
    def total(self) -> Fraction:
        return sum((probability.value for probability, _ in self.alternatives), Fraction(0))

    @property
    def heads(self) -> tuple[Atom, ...]:
        return tuple(atom for _, atom in self.alternatives)

    def variables(self) -> list[Variable]:
        return _ordered_variables(list(self.heads) + [literal.atom for literal in self.body])

    def substitute(self, theta) -> AnnotatedDisjunction:
        return AnnotatedDisjunction(
            tuple((probability, atom.substitute(theta)) for probability, atom in self.alternatives),
            tuple(literal.substitute(theta) for literal in self.body),
        )

    def __str__(self):
        text = "; ".join(f"{probability}::{atom}" for probability, atom in self.alternatives)
        if self.body:
            text = f"{text} :- {_render_body(self.body)}"
        return f"{text}."


Statement = Clause | AnnotatedDisjunction


@dataclass(frozen=True)
class Query:
    """A query atom; domain literals range its variables when it is not ground."""

    atom: Atom
    domain: tuple[Literal, ...] = ()

    def __str__(self):
        if self.domain:
            return f"query({self.atom}) :- {_render_body(self.domain)}."
        return f"query({self.atom})."


@dataclass(frozen=True)
class LogicProgram:
    statements: tuple[Statement, ...] = ()
    queries: tuple[Query, ...] = ()

    @property
    def facts(self) -> list[Clause]:
        return [st for st in self.statements if isinstance(st, Clause) and st.is_fact]

    @property
    def probabilistic_facts(self) -> list[Clause]:
        return [st for st in self.statements if isinstance(st, Clause) and st.is_probabilistic_fact]

    @property
    def rules(self) -> list[Clause]:
        return [st for st in self.statements if isinstance(st, Clause) and st.body]

    @property
    def disjunctions(self) -> list[AnnotatedDisjunction]:
        return [st for st in self.statements if isinstance(st, AnnotatedDisjunction)]

    def symbols(self) -> set[str]:
        names = set()
        for statement in self.statements:
            names.update(atom.symbol for atom in statement.heads)
            names.update(literal.atom.symbol for literal in statement.body)
        for query in self.queries:
            names.add(query.atom.symbol)
            names.update(literal.atom.symbol for literal in query.domain)
        return names


# --- Reader for the textual form


_TOKEN = re.compile(
    r"""
    (?P<space>\s+|%[^\n]*)
    |(?P<number>\d+(?:\.\d+)?)
    |(?P<name>[a-z][A-Za-z0-9_]*)
    |(?P<variable>[A-Z_][A-Za-z0-9_]*)
    |(?P<punct>:-|::|\\\+|[(),;./])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, file: str = "<program>") -> list[Token]:
    tokens = []
    position = 0
    line, line_start = 1, 0
    while position < len(text):
        match = _TOKEN.match(text, position)
        if not match:
            span = SourceSpan(file, line, position - line_start + 1, 1)
            raise LogicSyntaxError(f"unexpected character {text[position]!r}", span)
        kind = match.lastgroup
        if kind != "space":
            tokens.append(Token(kind, match.group(), line, position - line_start + 1))
        newlines = match.group().count("\n")
        if newlines:
            line += newlines
            line_start = match.start() + match.group().rindex("\n") + 1
        position = match.end()
    return tokens


class ProgramParser:
    """Recursive-descent reader for facts, rules, ADs and query/1 directives."""

    def __init__(self, text: str, file: str = "<program>"):
        self.file = file
        self.tokens = tokenize(text, file)
        self.i = 0
        self.statements: list[Statement] = []
        self.queries: list[Query] = []

    def more(self) -> bool:
        return self.i < len(self.tokens)

    def peek(self, offset=0) -> Token | None:
        index = self.i + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def error(self, message, token=None):
        token = token or self.peek() or (self.tokens[-1] if self.tokens else None)
        span = SourceSpan(self.file, token.line, token.column, len(token.text)) if token else SourceSpan(self.file, 1, 1)
        return LogicSyntaxError(message, span)

    def accept(self, text) -> bool:
        token = self.peek()
        if token is not None and token.text == text and token.kind in ("punct", "name"):
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            found = self.peek()
            raise self.error(f"expected {text!r}, found {found.text if found else 'end of input'!r}")

    def parse(self) -> LogicProgram:
        while self.more():
            self.statement()
        return LogicProgram(tuple(self.statements), tuple(self.queries))

    def statement(self):
        token = self.peek()
        following = self.peek(1)
        if token.kind == "name" and token.text == "query" and following is not None and following.text == "(":
            self.i += 2
            atom = self.atom()
            self.expect(")")
            domain = self.body() if self.accept(":-") else ()
            self.expect(".")
            self.queries.append(Query(atom, domain))
            return

        alternatives = [self.annotated_atom()]
        while self.accept(";"):
            alternatives.append(self.annotated_atom())
        body = self.body() if self.accept(":-") else ()
        self.expect(".")
        if len(alternatives) == 1:
            probability, head = alternatives[0]
            self.statements.append(Clause(head, body, probability))
            return
        if any(probability is None for probability, _ in alternatives):
            raise self.error("every alternative of an annotated disjunction needs a probability", token)
        self.statements.append(AnnotatedDisjunction(tuple(alternatives), body))

    def annotated_atom(self):
        probability = None
        if self.peek() is not None and self.peek().kind == "number":
            probability = self.probability()
            self.expect("::")
        return probability, self.atom()

    def probability(self) -> Probability:
        start = self.peek()
        numerator = Fraction(self.tokens[self.i].text)
        self.i += 1
        fractional = False
        if self.accept("/"):
            token = self.peek()
            if token is None or token.kind != "number":
                raise self.error("expected a denominator")
            self.i += 1
            denominator = Fraction(token.text)
            if denominator == 0:
                raise self.error("probability divides by zero", token)
            numerator /= denominator
            fractional = numerator.denominator != 1
        if numerator > 1:
            raise self.error(f"probability {format_fraction(numerator)} is greater than 1", start)
        return Probability(numerator, fractional)

    def atom(self) -> Atom:
        token = self.peek()
        if token is None or token.kind != "name":
            raise self.error("expected an atom")
        self.i += 1
        args = []
        if self.accept("("):
            args.append(self.term())
            while self.accept(","):
                args.append(self.term())
            self.expect(")")
        return Atom(token.text, tuple(args))

    def term(self) -> Term:
        token = self.peek()
        if token is None:
            raise self.error("expected a term")
        self.i += 1
        if token.kind == "variable":
            return Variable(token.text)
        if token.kind == "name":
            return Constant(token.text)
        if token.kind == "number":
            return Constant(Fraction(token.text))
        raise self.error(f"expected a term, found {token.text!r}", token)

    def body(self) -> tuple[Literal, ...]:
        literals = [self.literal()]
        while self.accept(","):
            literals.append(self.literal())
        return tuple(literals)

    def literal(self) -> Literal:
        if self.accept("\\+"):
            return Literal(self.atom(), negated=True)
        token, following = self.peek(), self.peek(1)
        if token is not None and token.text == "not" and following is not None and following.text == "(":
            self.i += 2
            atom = self.atom()
            self.expect(")")
            return Literal(atom, negated=True)
        return Literal(self.atom())


def parse_program(text: str, file: str = "<program>") -> LogicProgram:
    """Read a program written in the supported ProbLog subset."""
    return ProgramParser(text, file).parse()
