"""Query structure for the supported SPARQL subset, its canonical text form
and the triple-pattern view used for scoring.

Filters are conjunctions of :class:`Filter` values, each a disjunction of
atomic :class:`FilterExpr` comparisons. REGEX patterns follow Python's
``re`` dialect.
"""
import re
from collections import Counter
from typing import Dict, Iterator, List, Optional, Tuple, Union

import attr
from attr import dataclass

from multiKGQA.errors import UnboundVariable
from multiKGQA.rdf import IRI, RDF_TYPE, BlankNode, Literal, escape_string

SELECT = "SELECT"
ASK = "ASK"

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")
REGEX = "REGEX"
LANG_EQ = "LANG-EQ"
OPERATORS = COMPARISONS + (REGEX, LANG_EQ)

_LOCAL_NAME = re.compile(r"^[\w\-]*$")


@dataclass(frozen=True)
class Variable:
    name: str

    def n3(self) -> str:
        return f"?{self.name}"

    def __str__(self) -> str:
        return self.n3()


PatternTerm = Union[IRI, Literal, BlankNode, Variable]


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    @property
    def terms(self) -> Tuple[PatternTerm, PatternTerm, PatternTerm]:
        return (self.subject, self.predicate, self.object)

    def variables(self) -> List[Variable]:
        return [term for term in self.terms if isinstance(term, Variable)]


@dataclass(frozen=True)
class FilterExpr:
    operator: str
    left: Variable
    right: Union[IRI, Literal, str]
    flags: str = ""

    def __attrs_post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unsupported filter operator {self.operator!r}")
        if self.operator == REGEX:
            re.compile(self.right, regex_flags(self.flags))


@dataclass(frozen=True)
class Filter:
    alternatives: Tuple[FilterExpr, ...]

    def variables(self) -> List[Variable]:
        return [expr.left for expr in self.alternatives]


@dataclass(frozen=True)
class GraphPattern:
    required: Tuple[TriplePattern, ...] = ()
    optional: Tuple[Tuple[TriplePattern, ...], ...] = ()

    def all_patterns(self) -> Iterator[TriplePattern]:
        yield from self.required
        for block in self.optional:
            yield from block

    def variables(self) -> List[Variable]:
        seen = {}
        for pattern in self.all_patterns():
            for variable in pattern.variables():
                seen.setdefault(variable, None)
        return list(seen)


@dataclass(frozen=True)
class CountAggregate:
    alias: Variable
    variable: Optional[Variable] = None
    distinct: bool = False


@dataclass(frozen=True)
class OrderKey:
    variable: Variable
    descending: bool = False


ProjectionItem = Union[Variable, CountAggregate]


def _sorted_prefixes(prefixes) -> Tuple[Tuple[str, str], ...]:
    return tuple(sorted(dict(prefixes).items()))


@dataclass(frozen=True)
class SparqlQuery:
    form: str
    where: GraphPattern
    projection: Optional[Tuple[ProjectionItem, ...]] = None
    prefixes: Tuple[Tuple[str, str], ...] = attr.ib(default=(), converter=_sorted_prefixes)
    filters: Tuple[Filter, ...] = ()
    distinct: bool = False
    group_by: Tuple[Variable, ...] = ()
    order_by: Tuple[OrderKey, ...] = ()
    limit: Optional[int] = None

    @property
    def prefix_map(self) -> Dict[str, str]:
        return dict(self.prefixes)

    @property
    def aggregates(self) -> List[CountAggregate]:
        return [item for item in self.projection or () if isinstance(item, CountAggregate)]

    def output_variables(self) -> List[Variable]:
        if self.form == ASK:
            return []
        if self.projection is None:
            return self.where.variables()
        return [
            item.alias if isinstance(item, CountAggregate) else item
            for item in self.projection
        ]

    def evolve(self, **changes) -> "SparqlQuery":
        return attr.evolve(self, **changes)


def regex_flags(flags: str) -> int:
    value = 0
    for flag in flags:
        value |= {"i": re.IGNORECASE, "m": re.MULTILINE, "s": re.DOTALL, "x": re.VERBOSE}.get(flag, 0)
    return value


def validate_query(query: SparqlQuery) -> SparqlQuery:
    """Raises UnboundVariable when a projected, filtered or grouped variable is not in the pattern."""
    bound = set(query.where.variables())
    aggregates = query.aggregates
    aliases = {aggregate.alias for aggregate in aggregates}
    for item in query.projection or ():
        if isinstance(item, CountAggregate):
            if item.variable is not None and item.variable not in bound:
                raise UnboundVariable(item.variable.name)
            if item.alias in bound:
                raise UnboundVariable(item.alias.name, "is already bound by the pattern")
        elif item not in bound:
            raise UnboundVariable(item.name)
        elif (aggregates or query.group_by) and item not in query.group_by:
            raise UnboundVariable(item.name, "is neither grouped nor aggregated")
    for filter_ in query.filters:
        for variable in filter_.variables():
            if variable not in bound:
                raise UnboundVariable(variable.name, "is used in FILTER but not in the pattern")
    for variable in query.group_by:
        if variable not in bound:
            raise UnboundVariable(variable.name)
    for key in query.order_by:
        if key.variable not in bound and key.variable not in aliases:
            raise UnboundVariable(key.variable.name, "is used in ORDER BY but not bound")
    return query


# serialization


def _term_text(term, prefixes: Tuple[Tuple[str, str], ...], position: str = "") -> str:
    if isinstance(term, Variable):
        return term.n3()
    if isinstance(term, IRI):
        if position == "predicate" and term.value == RDF_TYPE:
            return "a"
        return _iri_text(term.value, prefixes)
    if isinstance(term, Literal):
        text = f'"{escape_string(term.lexical)}"'
        if term.language is not None:
            return f"{text}@{term.language}"
        if term.datatype is not None:
            return f"{text}^^{_iri_text(term.datatype, prefixes)}"
        return text
    return term.n3()


def _iri_text(iri: str, prefixes: Tuple[Tuple[str, str], ...]) -> str:
    for prefix, namespace in prefixes:
        if iri.startswith(namespace) and len(iri) > len(namespace):
            local = iri[len(namespace) :]
            if _LOCAL_NAME.match(local):
                return f"{prefix}:{local}"
    return f"<{iri}>"


def _pattern_text(pattern: TriplePattern, prefixes) -> str:
    return " ".join(
        _term_text(term, prefixes, position)
        for term, position in zip(pattern.terms, ("subject", "predicate", "object"))
    )


def _filter_text(filter_: Filter, prefixes) -> str:
    parts = []
    for expr in filter_.alternatives:
        if expr.operator == REGEX:
            flags = f', "{escape_string(expr.flags)}"' if expr.flags else ""
            parts.append(f'REGEX({expr.left.n3()}, "{escape_string(expr.right)}"{flags})')
        elif expr.operator == LANG_EQ:
            parts.append(f'LANG({expr.left.n3()}) = "{escape_string(expr.right)}"')
        else:
            parts.append(f"{expr.left.n3()} {expr.operator} {_term_text(expr.right, prefixes)}")
    return "FILTER(" + " || ".join(parts) + ")"


def _projection_text(query: SparqlQuery) -> str:
    if query.projection is None:
        return "*"
    parts = []
    for item in query.projection:
        if isinstance(item, CountAggregate):
            target = "*" if item.variable is None else item.variable.n3()
            distinct = "DISTINCT " if item.distinct else ""
            parts.append(f"(COUNT({distinct}{target}) AS {item.alias.n3()})")
        else:
            parts.append(item.n3())
    return " ".join(parts)


def serialize_sparql(query: SparqlQuery) -> str:
    prefixes = tuple(sorted(query.prefixes))
    lines = [f"PREFIX {prefix}: <{namespace}>" for prefix, namespace in prefixes]
    if query.form == ASK:
        lines.append("ASK")
    else:
        distinct = "DISTINCT " if query.distinct else ""
        lines.append(f"SELECT {distinct}{_projection_text(query)}")
    lines.append("WHERE {")
    for pattern in query.where.required:
        lines.append(f"  {_pattern_text(pattern, prefixes)} .")
    for block in query.where.optional:
        lines.append("  OPTIONAL {")
        for pattern in block:
            lines.append(f"    {_pattern_text(pattern, prefixes)} .")
        lines.append("  }")
    for filter_ in query.filters:
        lines.append(f"  {_filter_text(filter_, prefixes)}")
    lines.append("}")
    if query.group_by:
        lines.append("GROUP BY " + " ".join(v.n3() for v in query.group_by))
    if query.order_by:
        keys = [
            f"DESC({key.variable.n3()})" if key.descending else f"ASC({key.variable.n3()})"
            for key in query.order_by
        ]
        lines.append("ORDER BY " + " ".join(keys))
    if query.limit is not None:
        lines.append(f"LIMIT {query.limit}")
    return "\n".join(lines) + "\n"


# scoring view


def triple_patterns_of(query: SparqlQuery) -> Counter:
    """Multiset of WHERE-clause patterns with variables renamed ?v0, ?v1, ... by first occurrence."""
    renaming: Dict[Variable, Variable] = {}

    def rename(term):
        if not isinstance(term, Variable):
            return term
        if term not in renaming:
            renaming[term] = Variable(f"v{len(renaming)}")
        return renaming[term]

    return Counter(
        TriplePattern(*(rename(term) for term in pattern.terms))
        for pattern in query.where.all_patterns()
    )


def constant_terms(query: SparqlQuery) -> Iterator[Tuple[str, PatternTerm]]:
    for pattern in query.where.all_patterns():
        for position, term in zip(("subject", "predicate", "object"), pattern.terms):
            if not isinstance(term, Variable):
                yield position, term
