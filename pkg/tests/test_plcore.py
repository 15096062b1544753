import random
from fractions import Fraction
from itertools import product

import pytest

from modules.errors import ChoiceSpaceTooLarge, NotStratified, ProbabilisticHeadConflict, UnsafeVariable
from modules.logic import AnnotatedDisjunction, Atom, Clause, Literal, LogicProgram, Query, parse_program
from modules.plcore import (
    TotalChoice,
    desugar,
    enumerate_choices,
    ground,
    least_model,
    query_exact,
    relevant_statements,
    stratify,
)
from modules.rational import Probability

ALARM = """
0.8::a.
0.3::b(1); 0.5::b(2); 0.2::b(3).
c :- a.
c :- b(1).
query(c).
"""


def probabilities(program, **options):
    return {str(result.query): result.probability for result in query_exact(program, **options)}


class TestQueryExact:
    def test_fact_and_disjunction(self):
        assert probabilities(parse_program(ALARM)) == {"c": Fraction(43, 50)}

    def test_result_rendering(self):
        (result,) = query_exact(parse_program(ALARM))
        assert result.render() == "c: 0.86"
        assert result.render(1) == "c: 0.9"
        assert result.to_dict() == {"query": "c", "probability": {"decimal": "0.86", "fraction": "43/50"}}

    def test_annotated_rules(self):
        program = parse_program(
            """
            0.5::rain.
            0.7::wet :- rain.
            0.2::wet :- not(rain).
            query(wet).
            """
        )
        assert probabilities(program) == {"wet": Fraction(1, 2) * Fraction(7, 10) + Fraction(1, 2) * Fraction(1, 5)}

    def test_negation(self):
        program = parse_program("0.25::a. b :- not(a). query(b). query(a).")
        assert probabilities(program) == {"b": Fraction(3, 4), "a": Fraction(1, 4)}

    def test_disjunction_with_no_choice(self):
        program = parse_program("0.2::x; 0.3::y. z :- x. z :- y. query(z).")
        assert probabilities(program) == {"z": Fraction(1, 2)}

    def test_variables_over_facts(self):
        program = parse_program(
            """
            person(ann). person(bob).
            0.4::sick(X) :- person(X).
            cough(X) :- sick(X), person(X).
            query(cough(X)) :- person(X).
            """
        )
        assert probabilities(program) == {"cough(ann)": Fraction(2, 5), "cough(bob)": Fraction(2, 5)}

    def test_open_probabilistic_fact(self):
        program = parse_program("0.5::coin(X). win :- coin(heads). win :- coin(tails). query(win).")
        assert probabilities(program) == {"win": Fraction(3, 4)}

    def test_query_matches_heads(self):
        program = parse_program("0.5::win(a). 0.2::win(b). query(win(X)).")
        assert probabilities(program) == {"win(a)": Fraction(1, 2), "win(b)": Fraction(1, 5)}

    def test_underivable_query_is_zero(self):
        program = parse_program("0.5::a. query(b).")
        assert probabilities(program) == {"b": 0}

    def test_recursion_without_negation(self):
        program = parse_program(
            """
            0.5::edge(a,b). 0.5::edge(b,c).
            node(a). node(b). node(c).
            path(X,Y) :- edge(X,Y), node(X), node(Y).
            path(X,Z) :- edge(X,Y), path(Y,Z), node(X), node(Y), node(Z).
            query(path(a,c)).
            """
        )
        assert probabilities(program) == {"path(a,c)": Fraction(1, 4)}

    def test_threads_give_the_same_result(self):
        program = parse_program(
            """
            0.1::a. 0.2::b. 0.3::c. 0.4::d.
            0.5::e; 0.25::f.
            g :- a, not(b).
            g :- c, e.
            h :- g, not(f).
            h :- d.
            query(g). query(h).
            """
        )
        assert probabilities(program, threads=3) == probabilities(program)

    def test_irrelevant_choice_points_do_not_count(self):
        noise = " ".join(f"0.5::noise{i}." for i in range(40))
        program = parse_program(f"{noise} 0.5::a. query(a).")
        assert probabilities(program, max_choice_points=1) == {"a": Fraction(1, 2)}

    def test_choice_space_cap(self):
        program = parse_program("0.5::a. 0.5::b. 0.5::c. d :- a, b, c. query(d).")
        with pytest.raises(ChoiceSpaceTooLarge) as error:
            query_exact(program, max_choice_points=2)
        assert error.value.choice_points == 3
        assert error.value.cap == 2

    def test_not_stratified(self):
        program = parse_program("0.5::r. p :- r, not(q). q :- not(p). query(p).")
        with pytest.raises(NotStratified) as error:
            query_exact(program)
        assert {str(atom) for atom in error.value.cycle} == {"p", "q"}

    def test_unsafe_variable_under_negation(self):
        program = parse_program("q(a). p(X) :- not(q(X)). query(p(a)).")
        with pytest.raises(UnsafeVariable) as error:
            query_exact(program)
        assert str(error.value.variable) == "X"

    def test_unsafe_variable_bound_by_derived_symbol(self):
        program = parse_program("r(a). s(X) :- r(X). t(X) :- s(X). query(t(a)).")
        with pytest.raises(UnsafeVariable):
            query_exact(program)

    def test_probabilistic_head_conflict(self):
        program = parse_program("b. 0.5::a. a :- b. query(a).")
        with pytest.raises(ProbabilisticHeadConflict):
            query_exact(program)


class TestDesugar:
    def test_annotated_rule_gets_auxiliary_fact(self):
        program = desugar(parse_program("0.3::h(X) :- p(X). p(a)."))
        assert [str(statement) for statement in program.statements] == [
            "h(X) :- p(X), aux1(X).",
            "0.3::aux1(X).",
            "p(a).",
        ]

    def test_auxiliary_names_avoid_program_symbols(self):
        program = desugar(parse_program("aux1. 0.5::h :- aux1."))
        assert str(program.statements[1]) == "h :- aux1, aux2."

    def test_plain_program_is_unchanged(self):
        program = parse_program("0.5::a. b :- a.")
        assert desugar(program) == program


class TestGround:
    def test_instantiates_over_fact_relations(self):
        program = ground(
            desugar(
                parse_program(
                    """
                    contact(ann,bob). contact(bob,ann).
                    0.2::infected(X) :- contact(X,Y), infected(Y).
                    """
                )
            )
        )
        rules = [str(statement) for statement in program.rules]
        assert rules == [
            "infected(ann) :- contact(ann,bob), infected(bob), aux1(ann,bob).",
            "infected(bob) :- contact(bob,ann), infected(ann), aux1(bob,ann).",
        ]
        assert sorted(str(statement) for statement in program.probabilistic_facts) == [
            "0.2::aux1(ann,bob).",
            "0.2::aux1(bob,ann).",
        ]

    def test_missing_relation_grounds_to_nothing(self):
        program = ground(parse_program("h(X) :- link(X). other."))
        assert [str(statement) for statement in program.statements] == ["other."]

    def test_queries_use_their_domain(self):
        program = ground(parse_program("t(a). t(b). t(c). q(a). query(p(X)) :- t(X), not(q(X))."))
        assert [str(query.atom) for query in program.queries] == ["p(b)", "p(c)"]


class TestStratify:
    def test_negation_raises_the_stratum(self):
        program = parse_program("a. b :- a. c :- not(b). d :- c, not(a).")
        strata = stratify(program)
        assert [sorted(str(atom) for atom in stratum) for stratum in strata] == [["a", "b"], ["c", "d"]]

    def test_cycle_through_negation(self):
        with pytest.raises(NotStratified):
            stratify(parse_program("p :- not(p)."))


class TestLeastModel:
    def test_selected_alternative(self):
        program = parse_program(ALARM)
        model = least_model(program, TotalChoice((True,), (1,)))
        assert {str(atom) for atom in model} == {"a", "b(2)", "c"}

    def test_nothing_selected(self):
        model = least_model(parse_program(ALARM), TotalChoice((False,), (2,)))
        assert {str(atom) for atom in model} == {"b(3)"}

    def test_full_disjunction_must_choose(self):
        with pytest.raises(ValueError):
            least_model(parse_program(ALARM), TotalChoice((True,), (None,)))

    def test_choice_shape_is_checked(self):
        with pytest.raises(ValueError):
            least_model(parse_program(ALARM), TotalChoice((True, False), (0,)))

    def test_program_must_be_ground(self):
        with pytest.raises(ValueError):
            least_model(parse_program("p(X) :- q(X)."), TotalChoice())

    def test_annotated_rule_follows_its_choice(self):
        program = parse_program("a. 0.5::b :- a.")
        assert {str(atom) for atom in least_model(program, TotalChoice((True,)))} == {"a", "b"}
        assert {str(atom) for atom in least_model(program, TotalChoice((False,)))} == {"a"}


def test_relevant_statements():
    program = parse_program("0.5::a. 0.5::b. c :- a. d :- b. query(c).")
    assert [str(statement) for statement in relevant_statements(program)] == ["0.5::a.", "c :- a."]


def test_enumerate_choices_of_example():
    choices = list(enumerate_choices(parse_program(ALARM)))
    assert len(choices) == 6
    assert dict(choices)[TotalChoice((True,), (1,))] == Fraction(2, 5)


# --- Random programs


def _probability(rng, limit=Fraction(1)):
    return Probability(Fraction(rng.randint(0, int(limit * 10)), 10))


def random_program(rng: random.Random, negation: float = 0.3):
    """An acyclic propositional program: facts p_i, disjunctions over c_i_j (some guarded by p atoms), rules for d_i."""
    statements = []
    points = []
    base = [Atom(f"p{i}") for i in range(rng.randint(1, 4))]
    for atom in base:
        probability = _probability(rng)
        statements.append(Clause(atom, probability=probability))
        points.append(("fact", atom, probability))
    chosen = []
    for i in range(rng.randint(0, 2)):
        alternatives, left = [], Fraction(1)
        for j in range(rng.randint(1, 3)):
            probability = _probability(rng, left)
            left -= probability.value
            alternatives.append((probability, Atom(f"c{i}_{j}")))
        guard = tuple(Literal(atom, rng.random() < negation) for atom in rng.sample(base, rng.randint(0, min(2, len(base)))))
        disjunction = AnnotatedDisjunction(tuple(alternatives), guard)
        statements.append(disjunction)
        points.append(("ad", disjunction))
        chosen.extend(atom for _, atom in alternatives)

    derived = []
    rules = []
    for i in range(rng.randint(1, 4)):
        head = Atom(f"d{i}")
        for _ in range(rng.randint(1, 2)):
            lower = base + chosen + derived
            body = tuple(Literal(atom, rng.random() < negation) for atom in rng.sample(lower, rng.randint(1, min(3, len(lower)))))
            probability = _probability(rng) if rng.random() < 0.3 and len(points) < 10 else None
            rule = Clause(head, body, probability)
            statements.append(rule)
            rules.append(rule)
            if probability is not None:
                points.append(("rule", rule, probability))
        derived.append(head)
    queries = tuple(Query(atom) for atom in base + chosen + derived)
    return LogicProgram(tuple(statements), queries), points, rules


def holds(body, true):
    return all((literal.atom in true) != literal.negated for literal in body)


def oracle(points, rules, queries):
    """Brute force over every outcome, deriving d atoms in declaration order."""
    outcomes = []
    for point in points:
        if point[0] == "ad":
            disjunction = point[1]
            options = [(probability.value, atom) for probability, atom in disjunction.alternatives]
            options.append((1 - disjunction.total, None))
            outcomes.append(options)
        else:
            probability = point[2].value
            outcomes.append([(probability, True), (1 - probability, False)])

    result = {query.atom: Fraction(0) for query in queries}
    for combination in product(*outcomes):
        weight = Fraction(1)
        true, enabled = set(), set()
        for point, (probability, selected) in zip(points, combination):
            weight *= probability
            if point[0] == "fact" and selected:
                true.add(point[1])
            elif point[0] == "ad" and selected is not None and holds(point[1].body, true):
                true.add(selected)
            elif point[0] == "rule" and selected:
                enabled.add(id(point[1]))
        for rule in rules:
            if rule.probability is not None and id(rule) not in enabled:
                continue
            if holds(rule.body, true):
                true.add(rule.head)
        for atom in result:
            if atom in true:
                result[atom] += weight
    return result


@pytest.mark.parametrize("seed", range(20))
def test_choice_weights_sum_to_one(seed):
    rng = random.Random(seed)
    for _ in range(50):
        program, _, _ = random_program(rng)
        assert sum(weight for _, weight in enumerate_choices(desugar(program))) == 1


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force(seed):
    rng = random.Random(1000 + seed)
    for _ in range(10):
        program, points, rules = random_program(rng)
        expected = oracle(points, rules, program.queries)
        actual = {result.query: result.probability for result in query_exact(program)}
        assert actual == expected


def sample_choices(rng, program, limit=20):
    choices = [choice for choice, _ in enumerate_choices(program)]
    return rng.sample(choices, min(limit, len(choices)))


@pytest.mark.parametrize("seed", range(10))
def test_at_most_one_alternative_holds(seed):
    rng = random.Random(2000 + seed)
    for _ in range(10):
        program, _, _ = random_program(rng)
        for choice in sample_choices(rng, program):
            model = least_model(program, choice)
            for disjunction in program.disjunctions:
                assert sum(atom in model for _, atom in disjunction.alternatives) <= 1


@pytest.mark.parametrize("seed", range(10))
def test_added_facts_only_grow_the_model(seed):
    rng = random.Random(3000 + seed)
    for _ in range(10):
        program, _, _ = random_program(rng, negation=0)
        heads = sorted({atom for statement in program.statements for atom in statement.heads}, key=str)
        extra = tuple(Clause(atom) for atom in rng.sample(heads, rng.randint(1, len(heads))))
        extended = LogicProgram(program.statements + extra, program.queries)
        for choice in sample_choices(rng, program):
            assert least_model(program, choice) <= least_model(extended, choice)
