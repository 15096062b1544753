from fractions import Fraction

import pytest

from modules.errors import LogicSyntaxError
from modules.logic import AnnotatedDisjunction, Atom, Clause, Constant, Literal, Query, Variable, parse_program
from modules.rational import Probability


def test_reads_every_statement_kind():
    program = parse_program(
        """
        % weather
        rain.
        0.3::wind.
        0.2::storm :- rain, wind.
        1/3::sun; 1/3::clouds.
        dry :- \\+ rain, not(storm).
        query(dry).
        query(p(X)) :- q(X).
        """
    )
    assert len(program.facts) == 1
    assert [str(statement) for statement in program.probabilistic_facts] == ["0.3::wind."]
    assert [str(statement) for statement in program.rules] == ["0.2::storm :- rain, wind.", "dry :- not(rain), not(storm)."]
    (disjunction,) = program.disjunctions
    assert disjunction.total == Fraction(2, 3)
    assert str(disjunction) == "1/3::sun; 1/3::clouds."
    assert [str(query) for query in program.queries] == ["query(dry).", "query(p(X)) :- q(X)."]
    assert program.queries[1].domain == (Literal(Atom("q", (Variable("X"),))),)


def test_terms():
    (fact,) = parse_program("measure(ann, 18.5, X, _y).").statements
    assert fact.head.args == (Constant("ann"), Constant(Fraction(37, 2)), Variable("X"), Variable("_y"))
    assert str(fact) == "measure(ann,18.5,X,_y)."


def test_symbols():
    program = parse_program("a :- b, not(c). query(d) :- e.")
    assert program.symbols() == {"a", "b", "c", "d", "e"}


def test_atom_helpers():
    atom = Atom("likes", (Variable("X"), Constant("bob"), Variable("X")))
    assert atom.key == ("likes", 3)
    assert not atom.is_ground
    ground = atom.substitute({Variable("X"): Constant("ann")})
    assert ground.is_ground
    assert str(ground) == "likes(ann,bob,ann)"


def test_clause_variables_keep_first_occurrence_order():
    (rule,) = parse_program("h(Y) :- p(X, Y), q(Z, X).").statements
    assert rule.variables() == [Variable("Y"), Variable("X"), Variable("Z")]


def test_disjunction_checks_its_total():
    with pytest.raises(LogicSyntaxError):
        AnnotatedDisjunction(((Probability(Fraction(3, 4)), Atom("a")), (Probability(Fraction(1, 2)), Atom("b"))))
    with pytest.raises(ValueError):
        AnnotatedDisjunction(())


def test_clause_rendering():
    clause = Clause(Atom("h"), (Literal(Atom("b"), negated=True),), Probability(Fraction(1, 6), fractional=True))
    assert str(clause) == "1/6::h :- not(b)."
    assert str(Query(Atom("h"))) == "query(h)."


@pytest.mark.parametrize(
    "text, line",
    [
        ("a :- .", 1),
        ("a", 1),
        ("a.\nb :- c,", 2),
        ("1.5::a.", 1),
        ("1/0::a.", 1),
        ("0.5::a; b.", 1),
        ("a.\n\n@b.", 3),
        ("query(a", 1),
    ],
)
def test_syntax_errors(text, line):
    with pytest.raises(LogicSyntaxError) as error:
        parse_program(text, "model.pl")
    assert error.value.span.file == "model.pl"
    assert error.value.span.line == line


def test_overfull_disjunction_is_rejected():
    with pytest.raises(LogicSyntaxError):
        parse_program("0.6::a; 0.6::b.")
