"""
Exact inference for the ProbLog subset.

A program is desugared (annotated rules become a rule plus a probabilistic
fact), grounded over its fact-defined symbols, checked for stratification,
cut down to the part the queries depend on, and then every total choice of
the remaining probabilistic facts and annotated disjunctions is evaluated to
its least model. Probabilities are summed as exact rationals.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import prod

import networkx as nx

from modules.config import CONFIG
from modules.errors import ChoiceSpaceTooLarge, InconsistentWeights, NotStratified, ProbabilisticHeadConflict, UnsafeVariable
from modules.logic import AnnotatedDisjunction, Atom, Clause, Literal, LogicProgram, Query, Variable
from modules.rational import format_decimal, format_fraction


@dataclass(frozen=True)
class TotalChoice:
    """
    One outcome of every choice point of a ground program.

    `facts` follows the probabilistic clauses in program order (True when the
    fact or annotated rule is selected), `ads` follows the annotated
    disjunctions (index of the selected alternative, None for no alternative).
    """

    facts: tuple[bool, ...] = ()
    ads: tuple[int | None, ...] = ()


@dataclass(frozen=True)
class QueryResult:
    query: Atom
    probability: Fraction

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ValueError(f"probability {self.probability} of {self.query} is outside [0, 1]")

    @property
    def fraction(self) -> str:
        return f"{self.probability.numerator}/{self.probability.denominator}"

    def decimal(self, digits: int | None = None) -> str:
        return format_decimal(self.probability, digits, CONFIG["DEFAULT_DECIMAL_PLACES"])

    def render(self, digits: int | None = None) -> str:
        return f"{self.query}: {format_fraction(self.probability, digits)}"

    def to_dict(self, digits: int | None = None):
        return {"query": str(self.query), "probability": {"decimal": self.decimal(digits), "fraction": self.fraction}}


# --- Desugaring


def desugar(program: LogicProgram) -> LogicProgram:
    """Replace every annotated rule `P::h :- body` by `h :- body, aux(V)` and `P::aux(V)`."""
    taken = program.symbols()
    counter = 0
    statements = []
    for statement in program.statements:
        if not (isinstance(statement, Clause) and statement.probability is not None and statement.body):
            statements.append(statement)
            continue
        counter += 1
        while f"aux{counter}" in taken:
            counter += 1
        aux = Atom(f"aux{counter}", tuple(statement.variables()))
        statements.append(Clause(statement.head, statement.body + (Literal(aux),)))
        statements.append(Clause(aux, probability=statement.probability))
    if counter:
        logging.info(f"Desugared annotated rules into {counter} auxiliary probabilistic facts")
    return LogicProgram(tuple(statements), program.queries)


def check_probabilistic_heads(program: LogicProgram):
    """Raise if a probabilistic fact's symbol is also defined by any other statement."""
    probabilistic = {statement.head.key for statement in program.probabilistic_facts}
    for statement in program.statements:
        if isinstance(statement, Clause) and statement.is_probabilistic_fact:
            continue
        for head in statement.heads:
            if head.key in probabilistic:
                raise ProbabilisticHeadConflict(f"'{statement}' defines {head.symbol}/{head.arity}, which is also a probabilistic fact")


# --- Grounding


def _match(pattern: Atom, atom: Atom) -> dict | None:
    if pattern.key != atom.key:
        return None
    theta = {}
    for expected, actual in zip(pattern.args, atom.args):
        if isinstance(expected, Variable):
            if theta.setdefault(expected, actual) != actual:
                return None
        elif expected != actual:
            return None
    return theta


def _join(literals, relations, theta=None) -> list[dict]:
    substitutions = [dict(theta or {})]
    for literal in literals:
        extended = []
        for current in substitutions:
            pattern = literal.atom.substitute(current)
            for fact in relations.get(pattern.key, ()):
                binding = _match(pattern, fact)
                if binding is not None:
                    extended.append({**current, **binding})
        substitutions = extended
    return substitutions


def _fact_relations(program: LogicProgram):
    """Ground facts of every symbol that nothing but ground facts defines."""
    derived = set()
    relations: dict[tuple[str, int], dict[Atom, None]] = {}
    for statement in program.statements:
        if isinstance(statement, Clause) and statement.is_fact and statement.head.is_ground:
            relations.setdefault(statement.head.key, {})[statement.head] = None
        else:
            derived.update(head.key for head in statement.heads)
    edb = {key: list(atoms) for key, atoms in relations.items() if key not in derived}
    return edb, derived


def _binding_literals(body, derived):
    return [literal for literal in body if not literal.negated and literal.atom.key not in derived]


def _ground_statement(statement, relations, derived):
    binders = _binding_literals(statement.body, derived)
    bound = {variable for literal in binders for variable in literal.atom.variables()}
    for variable in statement.variables():
        if variable not in bound:
            raise UnsafeVariable(statement, variable)
    if not statement.variables():
        return [statement]
    return [statement.substitute(theta) for theta in _join(binders, relations)]


def _ground_queries(queries, relations, derived, heads):
    grounded = []
    for query in queries:
        binders = _binding_literals(query.domain, derived)
        for theta in _join(binders, relations):
            excluded = any(
                literal.negated and literal.atom.substitute(theta) in relations.get(literal.atom.key, ())
                for literal in query.domain
            )
            if excluded:
                continue
            atom = query.atom.substitute(theta)
            if atom.is_ground:
                grounded.append(atom)
            else:
                grounded.extend(head for head in heads if _match(atom, head) is not None)
    return list(dict.fromkeys(grounded))


def ground(program: LogicProgram) -> LogicProgram:
    """
    Instantiate every statement over the ground facts of fact-defined symbols.

    Variables must occur in a positive body literal whose symbol is defined by
    ground facts only. Non-ground probabilistic facts are instantiated for the
    ground atoms the rest of the program mentions.
    """
    relations, derived = _fact_relations(program)
    blocks = []
    for statement in program.statements:
        if isinstance(statement, Clause) and statement.is_probabilistic_fact and not statement.head.is_ground:
            blocks.append(statement)
        else:
            blocks.append(_ground_statement(statement, relations, derived))

    mentioned = {}
    for block in blocks:
        if isinstance(block, list):
            for statement in block:
                for literal in statement.body:
                    mentioned[literal.atom] = None
    for query in program.queries:
        if query.atom.is_ground:
            mentioned[query.atom] = None

    statements = []
    for block in blocks:
        if isinstance(block, list):
            statements.extend(block)
        else:
            statements.extend(
                Clause(atom, probability=block.probability) for atom in mentioned if _match(block.head, atom) is not None
            )

    heads = list(dict.fromkeys(head for statement in statements for head in statement.heads))
    queries = _ground_queries(program.queries, relations, derived, heads)
    logging.info(f"Grounded {len(program.statements)} statements into {len(statements)}, {len(queries)} queries")
    return LogicProgram(tuple(statements), tuple(Query(atom) for atom in queries))


# --- Stratification


def dependency_graph(program: LogicProgram) -> nx.DiGraph:
    """Edges run from body atoms to head atoms; `negative` marks a dependency through negation."""
    graph = nx.DiGraph()
    for statement in program.statements:
        for head in statement.heads:
            graph.add_node(head)
            for literal in statement.body:
                negative = literal.negated or graph.get_edge_data(literal.atom, head, {}).get("negative", False)
                graph.add_edge(literal.atom, head, negative=negative)
    return graph


def _levels(graph: nx.DiGraph) -> dict[Atom, int]:
    condensed = nx.condensation(graph)
    component_of = condensed.graph["mapping"]
    for u, v, negative in graph.edges(data="negative"):
        if negative and component_of[u] == component_of[v]:
            component = graph.subgraph(condensed.nodes[component_of[u]]["members"])
            path = [u] if u == v else nx.shortest_path(component, v, u)
            raise NotStratified([u] + path)

    component_level = {}
    for component in nx.topological_sort(condensed):
        level = 0
        for member in condensed.nodes[component]["members"]:
            for u, _, negative in graph.in_edges(member, data="negative"):
                if component_of[u] != component:
                    level = max(level, component_level[component_of[u]] + (1 if negative else 0))
        component_level[component] = level
    return {atom: component_level[component_of[atom]] for atom in graph}


def stratify(program: LogicProgram) -> tuple[frozenset[Atom], ...]:
    """Layer a ground program so negated atoms are always in a strictly lower stratum."""
    levels = _levels(dependency_graph(program))
    strata: dict[int, set[Atom]] = {}
    for atom, level in levels.items():
        strata.setdefault(level, set()).add(atom)
    return tuple(frozenset(strata[level]) for level in sorted(strata))


# --- Evaluation


@dataclass(frozen=True)
class _Compiled:
    """An integer-indexed ground program, ready to evaluate for any total choice."""

    atoms: tuple[Atom, ...]
    facts: tuple[int, ...]
    rules: tuple[tuple[int, tuple[int, ...], tuple[int, ...]], ...]
    conditional: frozenset[int]
    strata: tuple[tuple[int, ...], ...]
    # one option list per choice point: (weight, atoms made true, rules enabled)
    points: tuple[tuple[tuple[Fraction, tuple[int, ...], tuple[int, ...]], ...], ...]
    queries: tuple[int, ...]

    @property
    def choices(self) -> int:
        return prod(len(options) for options in self.points)


def _compile(statements, queries, levels) -> _Compiled:
    index: dict[Atom, int] = {}

    def ix(atom):
        return index.setdefault(atom, len(index))

    facts, rules, conditional = [], [], set()
    fact_points, ad_points = [], []

    def add_rule(head, body, chosen=False):
        rule_id = len(rules)
        positive = tuple(ix(literal.atom) for literal in body if not literal.negated)
        negative = tuple(ix(literal.atom) for literal in body if literal.negated)
        rules.append((ix(head), positive, negative))
        if chosen:
            conditional.add(rule_id)
        return rule_id

    for statement in statements:
        if isinstance(statement, AnnotatedDisjunction):
            options = [(probability.value, (), (add_rule(atom, statement.body, chosen=True),)) for probability, atom in statement.alternatives]
            if statement.total < 1:
                options.append((1 - statement.total, (), ()))
            ad_points.append(tuple(options))
        elif statement.probability is None:
            if statement.body:
                add_rule(statement.head, statement.body)
            else:
                facts.append(ix(statement.head))
        elif statement.body:
            rule_id = add_rule(statement.head, statement.body, chosen=True)
            fact_points.append(((statement.probability.value, (), (rule_id,)), (statement.probability.complement(), (), ())))
        else:
            fact_points.append(((statement.probability.value, (ix(statement.head),), ()), (statement.probability.complement(), (), ())))

    query_ids = tuple(ix(atom) for atom in queries)
    atom_list = list(index)
    by_level: dict[int, list[int]] = {}
    for rule_id, (head, _, _) in enumerate(rules):
        by_level.setdefault(levels.get(atom_list[head], 0), []).append(rule_id)
    return _Compiled(
        atoms=tuple(index),
        facts=tuple(facts),
        rules=tuple(rules),
        conditional=frozenset(conditional),
        strata=tuple(tuple(by_level[level]) for level in sorted(by_level)),
        points=tuple(fact_points + ad_points),
        queries=query_ids,
    )


def _evaluate(compiled: _Compiled, digits, prune: bool = True) -> tuple[bytearray, Fraction]:
    model = bytearray(len(compiled.atoms))
    for atom in compiled.facts:
        model[atom] = 1
    enabled = set()
    weight = Fraction(1)
    for options, digit in zip(compiled.points, digits):
        probability, atoms, rule_ids = options[digit]
        weight *= probability
        for atom in atoms:
            model[atom] = 1
        enabled.update(rule_ids)
    if prune and not weight:
        return model, weight

    for stratum in compiled.strata:
        changed = True
        while changed:
            changed = False
            for rule_id in stratum:
                head, positive, negative = compiled.rules[rule_id]
                if model[head] or (rule_id in compiled.conditional and rule_id not in enabled):
                    continue
                if all(model[atom] for atom in positive) and not any(model[atom] for atom in negative):
                    model[head] = 1
                    changed = True
    return model, weight


def _digits(compiled: _Compiled, index: int) -> list[int]:
    digits = []
    for options in compiled.points:
        index, digit = divmod(index, len(options))
        digits.append(digit)
    return digits


def _evaluate_slice(compiled: _Compiled, start: int, stop: int) -> tuple[Fraction, list[Fraction]]:
    """Total weight and per-query probability mass of the choices numbered [start, stop)."""
    total = Fraction(0)
    sums = [Fraction(0)] * len(compiled.queries)
    for index in range(start, stop):
        model, weight = _evaluate(compiled, _digits(compiled, index))
        if not weight:
            continue
        total += weight
        for position, atom in enumerate(compiled.queries):
            if model[atom]:
                sums[position] += weight
    return total, sums


def _slices(count: int, parts: int) -> list[tuple[int, int]]:
    size, extra = divmod(count, parts)
    bounds, start = [], 0
    for part in range(parts):
        stop = start + size + (1 if part < extra else 0)
        if stop > start:
            bounds.append((start, stop))
        start = stop
    return bounds


def _choice_digits(program: LogicProgram, choice: TotalChoice) -> list[int]:
    clauses = [st for st in program.statements if isinstance(st, Clause) and st.probability is not None]
    ads = program.disjunctions
    if len(choice.facts) != len(clauses) or len(choice.ads) != len(ads):
        raise ValueError(
            f"choice covers {len(choice.facts)} facts and {len(choice.ads)} disjunctions, "
            f"program has {len(clauses)} and {len(ads)}"
        )
    digits = [0 if selected else 1 for selected in choice.facts]
    for ad, selected in zip(ads, choice.ads):
        if selected is None:
            if ad.total == 1:
                raise ValueError(f"'{ad}' sums to 1 and must select an alternative")
            digits.append(len(ad.alternatives))
        elif not 0 <= selected < len(ad.alternatives):
            raise ValueError(f"'{ad}' has no alternative {selected}")
        else:
            digits.append(selected)
    return digits


def _require_ground(program: LogicProgram):
    for statement in program.statements:
        if statement.variables():
            raise ValueError(f"'{statement}' is not ground")


def least_model(program: LogicProgram, choice: TotalChoice) -> frozenset[Atom]:
    """The unique model of a ground, stratified program under one total choice."""
    _require_ground(program)
    compiled = _compile(program.statements, (), _levels(dependency_graph(program)))
    model, _ = _evaluate(compiled, _choice_digits(program, choice), prune=False)
    return frozenset(atom for position, atom in enumerate(compiled.atoms) if model[position])


def enumerate_choices(program: LogicProgram):
    """Yield every total choice of a ground program with its weight."""
    _require_ground(program)
    fact_options = [
        [(True, clause.probability.value), (False, clause.probability.complement())]
        for clause in program.statements
        if isinstance(clause, Clause) and clause.probability is not None
    ]
    ad_options = []
    for ad in program.disjunctions:
        options = [(position, probability.value) for position, (probability, _) in enumerate(ad.alternatives)]
        if ad.total < 1:
            options.append((None, 1 - ad.total))
        ad_options.append(options)
    facts_count = len(fact_options)
    for combination in product(*fact_options, *ad_options):
        choice = TotalChoice(
            tuple(selected for selected, _ in combination[:facts_count]),
            tuple(selected for selected, _ in combination[facts_count:]),
        )
        yield choice, prod((weight for _, weight in combination), start=Fraction(1))


def relevant_statements(program: LogicProgram, graph: nx.DiGraph | None = None):
    """Statements of a ground program that some query atom depends on."""
    graph = dependency_graph(program) if graph is None else graph
    relevant = set()
    for query in program.queries:
        relevant.add(query.atom)
        if query.atom in graph:
            relevant.update(nx.ancestors(graph, query.atom))
    return [statement for statement in program.statements if any(head in relevant for head in statement.heads)]


def _choice_point_count(statements) -> int:
    return sum(
        1 for statement in statements if isinstance(statement, AnnotatedDisjunction) or statement.probability is not None
    )


def query_exact(program: LogicProgram, max_choice_points: int | None = None, threads: int = 1) -> list[QueryResult]:
    """
    Exact probability of every query of a program.

    Sums, over every total choice of the relevant ground program, the weight
    of the choices whose least model contains the query atom.

    Args:
        program (LogicProgram): Program with its queries; need not be ground.
        max_choice_points (int | None): Cap on relevant choice points, CONFIG["MAX_CHOICE_POINTS"] when None.
        threads (int): Worker processes sharing the enumeration.

    Returns:
        list[QueryResult]: One result per ground query, in query order.

    Raises:
        EngineError: Unsafe variables, negation cycles, probabilistic head conflicts or too many choice points.
    """
    cap = CONFIG["MAX_CHOICE_POINTS"] if max_choice_points is None else max_choice_points
    desugared = desugar(program)
    check_probabilistic_heads(desugared)
    grounded = ground(desugared)
    graph = dependency_graph(grounded)
    levels = _levels(graph)

    statements = relevant_statements(grounded, graph)
    points = _choice_point_count(statements)
    if points > cap:
        raise ChoiceSpaceTooLarge(points, cap)
    queries = [query.atom for query in grounded.queries]
    compiled = _compile(statements, queries, levels)
    logging.info(
        f"Evaluating {len(queries)} queries over {len(statements)} relevant statements, "
        f"{points} choice points, {compiled.choices} total choices"
    )

    workers = max(1, min(threads, compiled.choices))
    if workers == 1:
        total, sums = _evaluate_slice(compiled, 0, compiled.choices)
    else:
        bounds = _slices(compiled.choices, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_slice, [compiled] * len(bounds), *zip(*bounds)))
        total = sum((part_total for part_total, _ in parts), Fraction(0))
        sums = [sum(column, Fraction(0)) for column in zip(*(part_sums for _, part_sums in parts))]
    if total != 1:
        raise InconsistentWeights(f"total choice weights sum to {total}, not 1")
    return [QueryResult(atom, probability) for atom, probability in zip(queries, sums)]
