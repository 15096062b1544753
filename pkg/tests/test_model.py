from fractions import Fraction

import pytest

from modules.errors import AmbiguousSymbol, InvalidName, InvalidType, Severity, TypeMismatch, UnknownSymbol
from modules.model import (
    Glossary,
    HitPolicy,
    QuerySet,
    Side,
    TypeDecl,
    VarRef,
    declare_function,
    declare_predicate,
    mangle_name,
    resolve_header,
    validate_model,
)
from modules.tableparse import parse_workbook


@pytest.fixture
def glossary():
    person = TypeDecl("Person", ("ann", "bob"))
    vaccine = TypeDecl("Vaccine", ("a", "b", "n"))
    types = {"Person": person, "Vaccine": vaccine}
    return Glossary(
        (person, vaccine),
        (declare_predicate("Person is infected", types), declare_predicate("Person contacted Person", types)),
        (declare_function("vaccine of Person", vaccine, types),),
    )


class TestMangleName:
    @pytest.mark.parametrize(
        "raw, mangled",
        [
            ("Person is infected", "person_is_infected"),
            ("vaccine of Person", "vaccine_of_person"),
            ("twoHeads", "twoheads"),
            ("  die   value ", "die_value"),
        ],
    )
    def test_mangles(self, raw, mangled):
        assert mangle_name(raw) == mangled

    def test_is_idempotent(self):
        for raw in ("Person contacted Person", "weight class of Person", "a_b c"):
            assert mangle_name(mangle_name(raw)) == mangle_name(raw)

    @pytest.mark.parametrize("raw", ["", "   ", "is-infected", "2heads", "die value?"])
    def test_rejects(self, raw):
        with pytest.raises(InvalidName):
            mangle_name(raw)


class TestTypeDecl:
    def test_rejects_empty(self):
        with pytest.raises(InvalidType):
            TypeDecl("Empty", ())

    def test_rejects_duplicates(self):
        with pytest.raises(InvalidType):
            TypeDecl("Person", ("ann", "Ann"))

    def test_rejects_mixed_domains(self):
        with pytest.raises(InvalidType):
            TypeDecl("Mixed", ("ann", Fraction(3)))

    def test_numeric_elements(self):
        decl = TypeDecl("Bmi", (Fraction(16), Fraction(37, 2)))
        assert decl.numeric
        assert decl.parse_element("18.5") == Fraction(37, 2)
        assert decl.parse_element("19") is None


class TestDeclarations:
    def test_argument_types_follow_the_name(self, glossary):
        contacted = glossary.predicates[1]
        assert [decl.name for decl in contacted.arg_types] == ["Person", "Person"]
        assert contacted.mangled == "person_contacted_person"

    def test_function_range_is_not_an_argument(self, glossary):
        function = glossary.functions[0]
        assert function.arity == 1
        assert function.logic_arity == 2
        assert function.range_type.name == "Vaccine"


class TestResolveHeader:
    def test_quantifier_letters(self, glossary):
        header = resolve_header("X contacted Y", glossary)
        assert header.target.mangled == "person_contacted_person"
        assert header.bindings == (VarRef("X"), VarRef("Y"))

    def test_element_argument(self, glossary):
        header = resolve_header("vaccine of bob", glossary, Side.OUTPUT)
        assert header.bindings == ("bob",)
        assert header.is_function
        assert header.side is Side.OUTPUT

    def test_type_name_becomes_fresh_letter(self, glossary):
        header = resolve_header("Person is infected", glossary, reserved={"X"})
        assert header.bindings == (VarRef("Y"),)

    def test_unknown_symbol(self, glossary):
        with pytest.raises(UnknownSymbol):
            resolve_header("X is healthy", glossary)

    def test_unknown_element(self, glossary):
        with pytest.raises(TypeMismatch):
            resolve_header("carl is infected", glossary)

    def test_ambiguous_declarations_are_typechecked(self):
        person = TypeDecl("Person", ("ann",))
        city = TypeDecl("City", ("ghent",))
        types = {"Person": person, "City": city}
        glossary = Glossary(
            (person, city),
            (declare_predicate("Person likes", types), declare_predicate("City likes", types)),
        )
        assert resolve_header("ghent likes", glossary).target.raw_name == "City likes"
        with pytest.raises(AmbiguousSymbol):
            resolve_header("X likes", glossary)


def test_hit_policy_parse():
    assert HitPolicy.parse("ch") is HitPolicy.CHOICE
    assert HitPolicy.parse("Unique") is HitPolicy.UNIQUE
    assert HitPolicy.parse("first") is HitPolicy.FIRST
    assert HitPolicy.parse("C+") is None


def test_default_queries_use_fresh_letters(glossary):
    queries = QuerySet.all_symbols(glossary)
    assert queries.implicit_all
    contacted, vaccine = queries.entries[1], queries.entries[2]
    assert contacted.args == (VarRef("X"), VarRef("Y"))
    assert vaccine.args == (VarRef("X"),)
    assert vaccine.value == VarRef("Y")


def _codes(diagnostics):
    return [(diagnostic.severity, diagnostic.code) for diagnostic in diagnostics]


class TestValidateModel:
    def test_choice_sum_exceeded(self, load_model):
        diagnostics = validate_model(load_model("choice_sum"))
        assert _codes(diagnostics) == [(Severity.ERROR, "ChoiceSumExceeded")]
        assert "1.2" in diagnostics[0].message
        assert diagnostics[0].table == "Toss"

    def test_clean_models(self, load_model):
        for name in ("coins", "coins_first", "dice", "earthquake", "bmi"):
            assert validate_model(load_model(name)) == [], name

    def test_undefined_input_is_reported_once(self, load_model):
        diagnostics = validate_model(load_model("infection"))
        assert _codes(diagnostics) == [(Severity.WARNING, "UndefinedInput")]
        assert "person_contacted_person" in diagnostics[0].message

    def test_probabilistic_function_outside_choice_table(self):
        model = parse_workbook(
            """
type "Type"
| Name    | Elements     |
| Weather | sunny, rainy |

function "Function"
| Name     | Type    |
| forecast | Weather |

decision "Weather" U
|| forecast | |
|| sunny | rainy |
|| 0.5 | 0.5 |
"""
        )
        assert _codes(validate_model(model)) == [(Severity.WARNING, "MultiValuedFunction")]

    def test_any_conflict_and_unique_overlap(self):
        source = """
predicate "Predicate"
| Name |
| rain |
| wet  |

decision "Rain" U
|| rain |
|| Yes  |

decision "Wet" {policy}
| rain || wet |
| Yes  || Yes |
| -    || No  |
"""
        any_model = parse_workbook(source.format(policy="A"))
        assert _codes(validate_model(any_model)) == [(Severity.ERROR, "AnyConflict")]
        unique_model = parse_workbook(source.format(policy="U"))
        assert _codes(validate_model(unique_model)) == [(Severity.WARNING, "UniqueOverlap")]
        first_model = parse_workbook(source.format(policy="F"))
        assert validate_model(first_model) == []

    def test_overlapping_choice_rows(self):
        model = parse_workbook(
            """
predicate "Predicate"
| Name |
| rain |
| wet  |

decision "Rain" U
|| rain |
|| Yes  |
|| 0.5  |

decision "Wet" Ch
| rain || wet |
|      || Yes |
| Yes  || 0.5 |
| -    || 0.3 |
"""
        )
        diagnostics = validate_model(model)
        assert _codes(diagnostics) == [(Severity.WARNING, "ChoiceOverlap")]
        assert "rows 1 and 2" in diagnostics[0].message

    def test_diagnostic_format(self, load_model):
        diagnostic = validate_model(load_model("choice_sum"))[0]
        text = diagnostic.format()
        assert "choice_sum.pdmn" in text
        assert "error[ChoiceSumExceeded]" in text
        assert diagnostic.to_dict()["severity"] == "error"
