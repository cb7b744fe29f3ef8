"""SPARQL synthesis for allocated subgoals: template selection, schema grounding
and post-hoc decoding.

Post-hoc decoding applies its rules in a fixed order (prefix injection,
syntax and binding checks, predicate and class existence, constant-pattern
removal, zero-usage flagging) and repairs each site at most once.
"""
import logging
import re
from typing import Dict, List, Optional, Tuple, Union

from attr import Factory, dataclass

from multiKGQA.allocator import AllocationDecision
from multiKGQA.backend import build_prompt
from multiKGQA.errors import (
    IncompatibleTyping,
    SparqlSyntaxError,
    UnboundVariable,
    UndefinedPrefix,
    UngroundableSlot,
    Unrepairable,
)
from multiKGQA.lexicon import Lexicon
from multiKGQA.rdf import IRI, NUMERIC_DATATYPES, RDF_TYPE, XSD_DECIMAL, XSD_INTEGER, Literal, Term
from multiKGQA.schema import STANDARD_PREFIXES, SchemaSlice, local_name
from multiKGQA.sparql_ast import (
    Filter,
    FilterExpr,
    GraphPattern,
    SparqlQuery,
    TriplePattern,
    Variable,
    serialize_sparql,
    validate_query,
)
from multiKGQA.sparql_parser import parse_sparql
from multiKGQA.subgoals import Subgoal
from multiKGQA.templates import QueryTemplate, TemplateLibrary, load_templates
from multiKGQA.text import jaccard, words

logger = logging.getLogger(__name__)

COSMETIC = "cosmetic"
STRUCTURAL = "structural"

REPLACEMENT_THRESHOLD = 0.5
FAN_OUT_CAP = 16

VALUE_VARIABLE = Variable("value")
JOIN_VARIABLE = "?x"

_NUMBER = re.compile(r"-?\d+(\.\d+)?")
_SCHEMA_VOCABULARY = tuple(STANDARD_PREFIXES.values())


@dataclass(frozen=True)
class RepairEntry:
    rule: str
    before: str
    after: str
    severity: str


@dataclass
class RepairLog:
    entries: List[RepairEntry] = Factory(list)
    flags: List[str] = Factory(list)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, rule: str, before: str, after: str, severity: str):
        self.entries.append(RepairEntry(rule, before, after, severity))
        logger.debug("%s repair %s: %s -> %s", severity, rule, before, after)

    def extend(self, other: "RepairLog"):
        self.entries.extend(other.entries)
        self.flags.extend(flag for flag in other.flags if flag not in self.flags)

    @property
    def structural(self) -> List[RepairEntry]:
        return [entry for entry in self.entries if entry.severity == STRUCTURAL]

    def to_json(self) -> dict:
        return {
            "entries": [
                {"rule": e.rule, "before": e.before, "after": e.after, "severity": e.severity}
                for e in self.entries
            ],
            "flags": list(self.flags),
        }


def curie(iri: str, slice: SchemaSlice) -> str:
    found = slice.prefix_for(iri)
    if found and re.fullmatch(r"[\w\-]+", iri[len(found[1]) :]):
        return f"{found[0]}:{iri[len(found[1]):]}"
    return f"<{iri}>"


def resolve_target(target: str, slice: SchemaSlice) -> str:
    """Expands a ``prefix:local`` lexicon hint with the slice's namespaces."""
    if "://" not in target and ":" in target:
        prefix, local = target.split(":", 1)
        if prefix in slice.namespaces:
            return slice.namespaces[prefix] + local
    return target


# template selection


def subgoal_arity(subgoal: Subgoal) -> int:
    """Distinct entity schemes plus relation mentions."""
    return len(slot_mentions(subgoal))


def slot_mentions(subgoal: Subgoal) -> List[str]:
    """Mentions that fill PRED slots: entity schemes first, then relation mentions."""
    schemes = []
    for mention in subgoal.entity_mentions:
        scheme, _ = subgoal.entity_parts(mention)
        if scheme is not None and scheme not in schemes:
            schemes.append(scheme)
    return schemes + [m for m in subgoal.relation_mentions if m not in schemes]


def select_template(subgoal: Subgoal, library: Optional[TemplateLibrary] = None) -> QueryTemplate:
    library = library or load_templates()
    return library.select(subgoal.intent, subgoal_arity(subgoal))


# grounding


def _grounded(mention: str, decision: AllocationDecision, lexicon: Optional[Lexicon], slice: SchemaSlice):
    iri = decision.grounding.get(mention)
    if iri is None and lexicon is not None:
        target = lexicon.default_target(mention)
        iri = resolve_target(target, slice) if target else None
    return iri


def _most_general(slice: SchemaSlice, classes) -> Optional[str]:
    classes = sorted(classes)
    roots = [c for c in classes if not any(c != other and slice.is_subclass(c, other) for other in classes)]
    return (roots or classes or [None])[0]


def _typed(value: str, predicate: Optional[str], slice: SchemaSlice) -> Literal:
    ranges = slice.ranges.get(predicate, set()) if predicate else set()
    numeric = sorted(r for r in ranges if r in NUMERIC_DATATYPES)
    if numeric and _NUMBER.fullmatch(value):
        return Literal(value, datatype=numeric[0])
    return Literal(value)


def _threshold(value: str, predicate: Optional[str], slice: SchemaSlice) -> Literal:
    literal = _typed(value, predicate, slice)
    if literal.datatype is None and _NUMBER.fullmatch(value):
        return Literal(value, datatype=XSD_DECIMAL if "." in value else XSD_INTEGER)
    return literal


def _entity_iri(subgoal: Subgoal, lexicon: Optional[Lexicon], slice: SchemaSlice) -> Optional[str]:
    if lexicon is None:
        return None
    for mention in subgoal.entity_mentions:
        scheme, _ = subgoal.entity_parts(mention)
        if scheme is None:
            entries = [e for e in lexicon.entries_for(mention) if e.kind == "entity" and e.target]
            if entries:
                return resolve_target(entries[0].target, slice)
    return None


def ground(
    template: QueryTemplate,
    subgoal: Subgoal,
    decision: AllocationDecision,
    slice: SchemaSlice,
    lexicon: Optional[Lexicon] = None,
    value: Optional[Term] = None,
) -> SparqlQuery:
    """Fills every slot of ``template`` and enforces the declared domains of the predicates.

    ``value`` binds the VALUE slot when the subgoal carries no equality
    constraint of its own; without either, VALUE becomes ``?value``.
    """
    values: Dict[str, str] = {}
    mentions = slot_mentions(subgoal)
    predicates: List[str] = []
    for index, name in enumerate(template.slots_of("predicate"), start=1):
        mention = mentions[index - 1] if index <= len(mentions) else None
        iri = _grounded(mention, decision, lexicon, slice) if mention else None
        if iri is None:
            raise UngroundableSlot(name, mention)
        predicates.append(iri)
        values[name] = IRI(iri).n3()

    first_predicate = predicates[0] if predicates else None
    if "SUBJ_CLASS" in template.slots:
        subject_class = None
        for mention in subgoal.class_mentions:
            subject_class = _grounded(mention, decision, lexicon, slice)
            if subject_class:
                break
        if subject_class is None and first_predicate:
            declared = slice.declared_domains.get(first_predicate)
            subject_class = _most_general(slice, declared or slice.domains.get(first_predicate, ()))
        if subject_class is None:
            raise UngroundableSlot("SUBJ_CLASS", (subgoal.class_mentions or [None])[0])
        for predicate in predicates:
            domain = slice.declared_domains.get(predicate)
            if domain and not any(slice.is_subclass(subject_class, c) for c in domain):
                raise IncompatibleTyping(predicate, subject_class, domain)
        values["SUBJ_CLASS"] = IRI(subject_class).n3()

    equalities = [v for v, op in subgoal.literal_constraints if op == "="]
    if "VALUE" in template.slots:
        if equalities:
            values["VALUE"] = _typed(equalities[0], first_predicate, slice).n3()
        elif value is not None:
            values["VALUE"] = value.n3()
        else:
            entity = _entity_iri(subgoal, lexicon, slice)
            values["VALUE"] = IRI(entity).n3() if entity else VALUE_VARIABLE.n3()
    for position, name in enumerate(("VALUE_1", "VALUE_2")):
        if name in template.slots:
            if position >= len(equalities):
                raise UngroundableSlot(name, None)
            values[name] = _typed(equalities[position], first_predicate, slice).n3()

    filters = subgoal.filter_constraints
    if "THRESHOLD" in template.slots or "OP" in template.slots:
        if not filters:
            raise UngroundableSlot("THRESHOLD", None)
        threshold, op = filters[0]
        values["THRESHOLD"] = _threshold(threshold, predicates[-1] if predicates else None, slice).n3()
        values["OP"] = op
    if "JOIN_VAR" in template.slots:
        values["JOIN_VAR"] = JOIN_VARIABLE

    query = parse_sparql(template.fill(values))
    return query.evolve(prefixes=used_prefixes(query, slice))


def used_prefixes(query: SparqlQuery, slice: SchemaSlice) -> Dict[str, str]:
    iris = set()
    for pattern in query.where.all_patterns():
        iris.update(term.value for term in pattern.terms if isinstance(term, IRI))
    for filter_ in query.filters:
        iris.update(e.right.value for e in filter_.alternatives if isinstance(e.right, IRI))
    prefixes = dict(query.prefixes)
    for iri in iris:
        if iri == RDF_TYPE:
            continue
        found = slice.prefix_for(iri)
        if found and found[0] not in prefixes:
            prefixes[found[0]] = found[1]
    return prefixes


# post-hoc decoding


def _names(iri: str, slice: SchemaSlice) -> List[str]:
    return sorted(slice.labels.get(iri, set())) + [" ".join(words(local_name(iri)))]


def nearest(iri: str, slice: SchemaSlice, candidates) -> Tuple[Optional[str], float]:
    """The candidate whose label or local name is closest to ``iri`` by stemmed Jaccard."""
    best, best_score = None, 0.0
    for candidate in sorted(candidates):
        if candidate == iri:
            continue
        score = max(jaccard(a, b) for a in _names(iri, slice) for b in _names(candidate, slice))
        if score > best_score:
            best, best_score = candidate, score
    return best, best_score


def known_predicates(slice: SchemaSlice) -> set:
    return {p for p in slice.predicates if not p.startswith(_SCHEMA_VOCABULARY)}


def known_classes(slice: SchemaSlice) -> set:
    classes = set(slice.classes)
    for constraint in (slice.declared_domains, slice.declared_ranges):
        for values in constraint.values():
            classes.update(v for v in values if not v.startswith(_SCHEMA_VOCABULARY))
    return classes


def _inject_prefixes(text: str, slice: SchemaSlice, log: RepairLog) -> SparqlQuery:
    injected = set()
    namespaces = dict(STANDARD_PREFIXES)
    namespaces.update(slice.namespaces)
    while True:
        try:
            return parse_sparql(text)
        except UndefinedPrefix as e:
            if e.prefix in injected or e.prefix not in namespaces:
                raise Unrepairable("prefix-resolution", f"prefix '{e.prefix}:' is not known to the graph")
            declaration = f"PREFIX {e.prefix}: <{namespaces[e.prefix]}>"
            text = declaration + "\n" + text
            injected.add(e.prefix)
            log.add("prefix-injection", f"{e.prefix}:", declaration, COSMETIC)
        except UnboundVariable as e:
            raise Unrepairable("variable-binding", str(e))
        except SparqlSyntaxError as e:
            raise Unrepairable("syntax", str(e))


def _map_patterns(where: GraphPattern, change) -> GraphPattern:
    return GraphPattern(
        tuple(change(p) for p in where.required),
        tuple(tuple(change(p) for p in block) for block in where.optional),
    )


def _replace_unknown(query: SparqlQuery, slice: SchemaSlice, log: RepairLog) -> SparqlQuery:
    predicates, classes = known_predicates(slice), known_classes(slice)
    replacements: Dict[Tuple[str, str], str] = {}
    for pattern in query.where.all_patterns():
        predicate = pattern.predicate
        if isinstance(predicate, IRI) and predicate.value != RDF_TYPE:
            if predicate.value not in slice.predicates and ("predicate", predicate.value) not in replacements:
                target, score = nearest(predicate.value, slice, predicates)
                if target is None or score < REPLACEMENT_THRESHOLD:
                    raise Unrepairable("predicate-existence", f"unknown predicate <{predicate.value}>")
                replacements[("predicate", predicate.value)] = target
                log.add("predicate-replacement", curie(predicate.value, slice), curie(target, slice), STRUCTURAL)
        if isinstance(predicate, IRI) and predicate.value == RDF_TYPE and isinstance(pattern.object, IRI):
            cls = pattern.object.value
            if cls not in classes and not cls.startswith(_SCHEMA_VOCABULARY) and ("class", cls) not in replacements:
                target, score = nearest(cls, slice, classes)
                if target is None or score < REPLACEMENT_THRESHOLD:
                    raise Unrepairable("class-existence", f"unknown class <{cls}>")
                replacements[("class", cls)] = target
                log.add("class-replacement", curie(cls, slice), curie(target, slice), STRUCTURAL)
    if not replacements:
        return query

    def change(pattern: TriplePattern) -> TriplePattern:
        predicate, obj = pattern.predicate, pattern.object
        if isinstance(predicate, IRI) and ("predicate", predicate.value) in replacements:
            predicate = IRI(replacements[("predicate", predicate.value)])
        if pattern.predicate == IRI(RDF_TYPE) and isinstance(obj, IRI) and ("class", obj.value) in replacements:
            obj = IRI(replacements[("class", obj.value)])
        return TriplePattern(pattern.subject, predicate, obj)

    return query.evolve(where=_map_patterns(query.where, change))


def _drop_constant_patterns(query: SparqlQuery, slice: SchemaSlice, log: RepairLog) -> SparqlQuery:
    required = list(query.where.required)
    constant = [p for p in required if not p.variables()]
    if not constant or len(constant) == len(required):
        return query
    for pattern in constant:
        text = " ".join(curie(t.value, slice) if isinstance(t, IRI) else t.n3() for t in pattern.terms)
        log.add("constant-pattern", text, "", STRUCTURAL)
    kept = tuple(p for p in required if p.variables())
    return query.evolve(where=GraphPattern(kept, query.where.optional))


def _flag_unused(query: SparqlQuery, slice: SchemaSlice, log: RepairLog):
    for pattern in query.where.all_patterns():
        predicate = pattern.predicate
        if isinstance(predicate, IRI) and slice.predicates.get(predicate.value, 1) == 0:
            flag = f"predicate {curie(predicate.value, slice)} is declared but never used"
            if flag not in log.flags:
                log.flags.append(flag)


def posthoc_decode(query: Union[SparqlQuery, str], slice: SchemaSlice) -> Tuple[SparqlQuery, RepairLog]:
    log = RepairLog()
    if isinstance(query, str):
        query = _inject_prefixes(query, slice, log)
    else:
        try:
            validate_query(query)
        except UnboundVariable as e:
            raise Unrepairable("variable-binding", str(e))
    query = _replace_unknown(query, slice, log)
    query = _drop_constant_patterns(query, slice, log)
    _flag_unused(query, slice, log)
    return query, log


# dependent values


def bind_value(query: SparqlQuery, term: Term) -> SparqlQuery:
    def change(pattern: TriplePattern) -> TriplePattern:
        return TriplePattern(*(term if t == VALUE_VARIABLE else t for t in pattern.terms))

    return query.evolve(where=_map_patterns(query.where, change))


def bind_values(query: SparqlQuery, terms: List[Term]) -> SparqlQuery:
    """Folds many values into one query: an equality disjunction on ``?value``, which is also projected."""
    disjunction = Filter(tuple(FilterExpr("=", VALUE_VARIABLE, term) for term in terms))
    projection = query.projection
    if projection is not None and VALUE_VARIABLE not in projection:
        projection = tuple(projection) + (VALUE_VARIABLE,)
    return validate_query(query.evolve(filters=query.filters + (disjunction,), projection=projection))


def prior_values(answer, limit: Optional[int] = None) -> List[Term]:
    """Distinct values of the first output variable of a prior answer set, in row order."""
    if answer is None or answer.is_boolean or not answer.variables:
        return []
    name = answer.variables[0]
    seen = {}
    for row in answer.rows:
        if name in row:
            seen.setdefault(row[name], None)
    values = list(seen)
    return values if limit is None else values[:limit]


@dataclass
class Synthesis:
    subgoal_id: int
    graph_id: str
    template_id: str
    queries: List[SparqlQuery]
    bound_values: List[Optional[Term]]
    repairs: RepairLog

    def to_json(self) -> dict:
        return {
            "subgoal_id": self.subgoal_id,
            "graph_id": self.graph_id,
            "template_id": self.template_id,
            "queries": [serialize_sparql(q) for q in self.queries],
            "repairs": self.repairs.to_json(),
        }


class Synthesizer:
    def __init__(
        self,
        library: Optional[TemplateLibrary] = None,
        lexicon: Optional[Lexicon] = None,
        backend=None,
        fan_out_cap: int = FAN_OUT_CAP,
    ):
        self.library = library or load_templates()
        self.lexicon = lexicon
        self.backend = backend
        self.fan_out_cap = fan_out_cap

    def select_template(self, subgoal: Subgoal) -> QueryTemplate:
        return select_template(subgoal, self.library)

    def _decode(self, query: SparqlQuery, slice: SchemaSlice) -> Tuple[SparqlQuery, RepairLog]:
        if self.backend is None:
            return posthoc_decode(query, slice)
        prompt = build_prompt(
            "Rewrite the draft SPARQL query so that it only uses the listed schema terms.",
            schema=" ".join(curie(p, slice) for p in sorted(known_predicates(slice))),
            draft=serialize_sparql(query),
        )
        response = self.backend.request("synthesize", prompt)
        if response.refused:
            logger.warning("backend %s refused to synthesize, keeping the grounded draft", response.backend_id)
            return posthoc_decode(query, slice)
        return posthoc_decode(response.text, slice)

    def synthesize(
        self,
        subgoal: Subgoal,
        decision: AllocationDecision,
        slice: SchemaSlice,
        prior=None,
    ) -> Synthesis:
        """Synthesizes the subgoal's query; with a prior answer set, one query per prior value.

        A dependent subgoal whose prior answer set is empty gets no queries.
        """
        template = self.select_template(subgoal)
        query = ground(template, subgoal, decision, slice, self.lexicon)
        query, repairs = self._decode(query, slice)
        if prior is None or VALUE_VARIABLE not in query.where.variables():
            return Synthesis(subgoal.id, decision.graph_id, template.id, [query], [None], repairs)
        values = prior_values(prior)
        if len(values) <= self.fan_out_cap:
            queries = [bind_value(query, value) for value in values]
            return Synthesis(subgoal.id, decision.graph_id, template.id, queries, list(values), repairs)
        logger.info("subgoal %d: %d prior values folded into one filter", subgoal.id, len(values))
        folded = bind_values(query, values)
        return Synthesis(subgoal.id, decision.graph_id, template.id, [folded], [None], repairs)


def synthesize(
    subgoal: Subgoal,
    decision: AllocationDecision,
    slice: SchemaSlice,
    lexicon: Optional[Lexicon] = None,
    library: Optional[TemplateLibrary] = None,
) -> Tuple[SparqlQuery, RepairLog]:
    result = Synthesizer(library, lexicon).synthesize(subgoal, decision, slice)
    return result.queries[0], result.repairs
