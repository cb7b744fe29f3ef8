"""Local evaluation of parsed queries over a TripleStore, the brute-force
reference evaluator, and the per-pipeline result cache.

Without ORDER BY, rows come out sorted by their canonical serialization.
"""
import logging
import operator
import re
import threading
import time
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

from attr import Factory, dataclass

from multiKGQA.errors import GuardExceeded
from multiKGQA.rdf import IRI, XSD_INTEGER, BlankNode, Literal, Term, Triple
from multiKGQA.sparql_ast import (
    ASK,
    LANG_EQ,
    REGEX,
    Filter,
    FilterExpr,
    SparqlQuery,
    TriplePattern,
    Variable,
    regex_flags,
    serialize_sparql,
)
from multiKGQA.triple_store import TripleStore

logger = logging.getLogger(__name__)

Binding = Dict[str, Term]

BRUTE_FORCE_GUARD = 10**8


@dataclass
class AnswerSet:
    query: SparqlQuery
    graph_id: str
    variables: List[str]
    rows: Union[List[Binding], bool]
    exec_time: float = 0.0
    truncated: bool = False
    subgoal_id: Optional[int] = None
    # graph of each variable when rows merge bindings of earlier subgoals
    sources: Dict[str, str] = Factory(dict)
    provenance: List[Tuple[str, int]] = Factory(list)

    def source_of(self, variable: str) -> str:
        return self.sources.get(variable, self.graph_id)

    def chain(self) -> List[Tuple[str, int]]:
        """(graph id, subgoal id) pairs this answer set was derived from, earliest first."""
        return self.provenance or [(self.graph_id, self.subgoal_id)]

    @property
    def is_boolean(self) -> bool:
        return isinstance(self.rows, bool)

    def is_empty(self) -> bool:
        return self.rows is False if self.is_boolean else not self.rows

    def row_multiset(self):
        if self.is_boolean:
            return {("boolean", self.rows): 1}
        counts = {}
        for row in self.rows:
            key = canonical_row(row)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def to_sparql_json(self) -> dict:
        if self.is_boolean:
            return {"head": {}, "boolean": self.rows}
        return {
            "head": {"vars": list(self.variables)},
            "results": {
                "bindings": [
                    {name: term_to_json(term) for name, term in row.items()}
                    for row in self.rows
                ]
            },
        }


def term_to_json(term: Term) -> dict:
    if isinstance(term, IRI):
        return {"type": "uri", "value": term.value}
    if isinstance(term, BlankNode):
        return {"type": "bnode", "value": term.label}
    encoded = {"type": "literal", "value": term.lexical}
    if term.datatype is not None:
        encoded["datatype"] = term.datatype
    if term.language is not None:
        encoded["xml:lang"] = term.language
    return encoded


def canonical_row(row: Binding) -> str:
    return " ".join(f"?{name}={row[name].n3()}" for name in sorted(row))


# pattern matching shared by both evaluators


def _extend(solution: Binding, pattern: TriplePattern, triple: Triple) -> Optional[Binding]:
    extended = None
    for term, value in zip(pattern.terms, (triple.subject, triple.predicate, triple.object)):
        if isinstance(term, Variable):
            bound = (extended or solution).get(term.name)
            if bound is None:
                if extended is None:
                    extended = dict(solution)
                extended[term.name] = value
            elif bound != value:
                return None
        elif term != value:
            return None
    return extended if extended is not None else dict(solution)


def _substitute(pattern: TriplePattern, solution: Binding) -> Tuple[Optional[Term], ...]:
    return tuple(
        solution.get(term.name) if isinstance(term, Variable) else term
        for term in pattern.terms
    )


def _join_order(patterns: Iterable[TriplePattern], store: TripleStore) -> List[TriplePattern]:
    def estimate(indexed):
        position, pattern = indexed
        constants = [None if isinstance(term, Variable) else term for term in pattern.terms]
        return (store.estimate(*constants), position)

    return [pattern for _, pattern in sorted(enumerate(patterns), key=estimate)]


def _indexed_join(patterns, store: TripleStore, seeds: List[Binding]) -> List[Binding]:
    solutions = seeds
    for pattern in _join_order(patterns, store):
        joined = []
        for solution in solutions:
            for triple in store.match(*_substitute(pattern, solution)):
                extended = _extend(solution, pattern, triple)
                if extended is not None:
                    joined.append(extended)
        solutions = joined
        if not solutions:
            break
    return solutions


def _enumerate(patterns, triples, seeds: List[Binding]) -> List[Binding]:
    results = []

    def assign(index: int, solution: Binding):
        if index == len(patterns):
            results.append(solution)
            return
        for triple in triples:
            extended = _extend(solution, patterns[index], triple)
            if extended is not None:
                assign(index + 1, extended)

    for seed in seeds:
        assign(0, seed)
    return results


def _left_join(solutions: List[Binding], block, match: Callable) -> List[Binding]:
    joined = []
    for solution in solutions:
        extended = match(block, [solution])
        joined.extend(extended if extended else [solution])
    return joined


# filters


@lru_cache(maxsize=256)
def _compiled(pattern: str, flags: str):
    return re.compile(pattern, regex_flags(flags))


_COMPARATORS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _text_of(term: Term) -> str:
    if isinstance(term, Literal):
        return term.lexical
    if isinstance(term, IRI):
        return term.value
    return term.n3()


def expression_holds(expr: FilterExpr, solution: Binding) -> bool:
    value = solution.get(expr.left.name)
    if value is None:
        return False
    if expr.operator == REGEX:
        if isinstance(value, BlankNode):
            return False
        return _compiled(expr.right, expr.flags).search(_text_of(value)) is not None
    if expr.operator == LANG_EQ:
        if not isinstance(value, Literal):
            return False
        return (value.language or "").lower() == expr.right.lower()
    compare = _COMPARATORS[expr.operator]
    left = value.numeric_value() if isinstance(value, Literal) else None
    right = expr.right.numeric_value() if isinstance(expr.right, Literal) else None
    if left is not None and right is not None:
        return compare(left, right)
    if expr.operator in ("=", "!="):
        return compare(value, expr.right)
    return compare(_text_of(value), _text_of(expr.right))


def filter_holds(filter_: Filter, solution: Binding) -> bool:
    return any(expression_holds(expr, solution) for expr in filter_.alternatives)


# solution modifiers


def _count(value: int) -> Literal:
    return Literal(str(value), datatype=XSD_INTEGER)


def _aggregate(query: SparqlQuery, solutions: List[Binding]) -> List[Binding]:
    keys = [variable.name for variable in query.group_by]
    groups: Dict[tuple, List[Binding]] = {}
    for solution in solutions:
        groups.setdefault(tuple(solution.get(name) for name in keys), []).append(solution)
    if not keys and not groups:
        groups[()] = []
    rows = []
    for key, members in groups.items():
        row = {name: term for name, term in zip(keys, key) if term is not None}
        for aggregate in query.aggregates:
            if aggregate.variable is None:
                values = [tuple(sorted(member.items(), key=lambda kv: kv[0])) for member in members]
            else:
                values = [member.get(aggregate.variable.name) for member in members]
                values = [value for value in values if value is not None]
            row[aggregate.alias.name] = _count(len(set(values)) if aggregate.distinct else len(values))
        rows.append(row)
    return rows


def order_key(term: Optional[Term]):
    if term is None:
        return (0, 0, 0.0, "")
    if isinstance(term, BlankNode):
        return (1, 0, 0.0, term.label)
    if isinstance(term, IRI):
        return (2, 0, 0.0, term.value)
    number = term.numeric_value()
    if number is not None:
        return (3, 0, number, "")
    return (3, 1, 0.0, term.lexical)


def finish(query: SparqlQuery, solutions: List[Binding], graph_id: str, started: float) -> AnswerSet:
    """Applies FILTER, grouping, ordering, projection, DISTINCT and LIMIT."""
    solutions = [s for s in solutions if all(filter_holds(f, s) for f in query.filters)]
    if query.form == ASK:
        return AnswerSet(query, graph_id, [], bool(solutions), time.perf_counter() - started)

    if query.aggregates or query.group_by:
        solutions = _aggregate(query, solutions)
    solutions.sort(key=canonical_row)
    for key in reversed(query.order_by):
        solutions.sort(key=lambda s: order_key(s.get(key.variable.name)), reverse=key.descending)

    variables = [variable.name for variable in query.output_variables()]
    rows = [{name: s[name] for name in variables if name in s} for s in solutions]
    if query.distinct:
        seen = set()
        unique = []
        for row in rows:
            key = canonical_row(row)
            if key not in seen:
                seen.add(key)
                unique.append(row)
        rows = unique

    truncated = False
    if query.limit is not None and len(rows) > query.limit:
        rows = rows[: query.limit]
        truncated = True
    return AnswerSet(query, graph_id, variables, rows, time.perf_counter() - started, truncated)


def evaluate_local(query: SparqlQuery, store: TripleStore) -> AnswerSet:
    started = time.perf_counter()
    solutions = _indexed_join(query.where.required, store, [{}])
    match = lambda block, seeds: _indexed_join(block, store, seeds)
    for block in query.where.optional:
        solutions = _left_join(solutions, block, match)
    return finish(query, solutions, store.graph_id, started)


def brute_force_evaluate(
    query: SparqlQuery, store: TripleStore, guard: int = BRUTE_FORCE_GUARD
) -> AnswerSet:
    """Reference evaluator: tries every triple for every pattern, in written order, without indexes."""
    started = time.perf_counter()
    n_patterns = len(query.where.required) + sum(len(b) for b in query.where.optional)
    if store.size**n_patterns > guard:
        raise GuardExceeded(
            f"{store.size}^{n_patterns} candidate assignments exceed the guard of {guard}"
        )
    triples = store.triples
    solutions = _enumerate(query.where.required, triples, [{}])
    match = lambda block, seeds: _enumerate(block, triples, seeds)
    for block in query.where.optional:
        solutions = _left_join(solutions, block, match)
    return finish(query, solutions, store.graph_id, started)


class LocalExecutor:
    kind = "file"

    def __init__(self, store: TripleStore):
        self.store = store
        self.graph_id = store.graph_id

    def execute(self, query: SparqlQuery) -> AnswerSet:
        return evaluate_local(query, self.store)

    def contains_term(self, term: Term) -> bool:
        return self.store.contains_term(term)


@dataclass
class ResultCache:
    """Answer sets keyed by (graph id, canonical query text), shared by verification and execution."""

    entries: Dict[Tuple[str, str], AnswerSet] = Factory(dict)
    hits: int = 0
    _lock: threading.Lock = Factory(threading.Lock)

    def get_or_execute(self, executor, query: SparqlQuery) -> AnswerSet:
        key = (executor.graph_id, serialize_sparql(query))
        with self._lock:
            if key in self.entries:
                self.hits += 1
                return self.entries[key]
        answer = executor.execute(query)
        with self._lock:
            self.entries.setdefault(key, answer)
        return answer


class CachedExecutor:
    def __init__(self, executor, cache: ResultCache):
        self._executor = executor
        self._cache = cache
        self.graph_id = executor.graph_id

    def execute(self, query: SparqlQuery) -> AnswerSet:
        return self._cache.get_or_execute(self._executor, query)

    def contains_term(self, term: Term) -> bool:
        return self._executor.contains_term(term)
