"""Two-stage query verification before execution.

Stage one runs the symbolic checks (syntax round-trip, predicate existence,
type compatibility, a LIMIT 1 preliminary execution). Stage two only runs when
every symbolic check passed: it perturbs up to ``m`` constants of the query
and requires at least one perturbation to change the result multiset.
"""
import logging
from typing import List, Optional, Tuple, Union

from attr import Factory, dataclass

from multiKGQA.errors import KGQAError, NoPerturbableSite, SparqlError, Unrepairable
from multiKGQA.rdf import IRI, RDF_TYPE, Literal, Term
from multiKGQA.schema import RDF_LANG_STRING, STANDARD_PREFIXES, SchemaSlice, local_name, namespace_of
from multiKGQA.sparql_ast import (
    ASK,
    Filter,
    FilterExpr,
    GraphPattern,
    SparqlQuery,
    TriplePattern,
    Variable,
    serialize_sparql,
)
from multiKGQA.sparql_parser import parse_sparql
from multiKGQA.synthesizer import posthoc_decode

logger = logging.getLogger(__name__)

PASS = "Pass"
FAIL_SYMBOLIC = "FailSymbolic"
FAIL_UNDERSPECIFIED = "FailUnderspecified"

SYNTAX = "syntax"
PREDICATE_EXISTENCE = "predicate-existence"
TYPE_COMPATIBILITY = "type-compatibility"
NONEMPTY_PRELIMINARY = "nonempty-preliminary"
CHECKS = (SYNTAX, PREDICATE_EXISTENCE, TYPE_COMPATIBILITY, NONEMPTY_PRELIMINARY)

REPLACE_ENTITY = "ReplaceEntity"
REPLACE_FILTER_CONSTANT = "ReplaceFilterConstant"
REPLACE_PREDICATE = "ReplacePredicate"

DEFAULT_PERTURBATIONS = 3

_SCHEMA_VOCABULARY = tuple(STANDARD_PREFIXES.values())
_FRESH = "⟂"


@dataclass(frozen=True)
class CheckResult:
    check: str
    status: str  # pass | fail | warn | skipped
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "fail"


@dataclass(frozen=True)
class Perturbation:
    kind: str
    # ("filter", filter index, alternative index) or
    # ("pattern", optional block index or -1, pattern index, position)
    site: tuple
    original: Term
    replacement: Term

    def describe(self) -> str:
        return f"{self.kind} at {'/'.join(str(s) for s in self.site)}: {self.original.n3()} -> {self.replacement.n3()}"


@dataclass(frozen=True)
class CounterfactualResult:
    perturbation: Perturbation
    changed: bool


@dataclass
class VerificationReport:
    query: Optional[SparqlQuery]
    graph_id: str
    stage1: List[CheckResult] = Factory(list)
    stage2: List[CounterfactualResult] = Factory(list)
    verdict: str = FAIL_SYMBOLIC
    suggested_revision: Optional[SparqlQuery] = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    @property
    def failed_check(self) -> Optional[str]:
        for result in self.stage1:
            if result.failed:
                return result.check
        return None

    def to_json(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "query": serialize_sparql(self.query) if self.query is not None else None,
            "verdict": self.verdict,
            "failed_check": self.failed_check,
            "stage1": [{"check": r.check, "status": r.status, "detail": r.detail} for r in self.stage1],
            "stage2": [{"perturbation": r.perturbation.describe(), "changed": r.changed} for r in self.stage2],
            "suggested_revision": (
                serialize_sparql(self.suggested_revision) if self.suggested_revision is not None else None
            ),
            "note": self.note,
        }


# stage 1


def _is_datatype(iri: str) -> bool:
    return iri.startswith(STANDARD_PREFIXES["xsd"]) or iri in (RDF_LANG_STRING, STANDARD_PREFIXES["rdfs"] + "Literal")


def _subject_classes(query: SparqlQuery) -> dict:
    classes = {}
    for pattern in query.where.all_patterns():
        if pattern.predicate == IRI(RDF_TYPE) and isinstance(pattern.object, IRI):
            classes.setdefault(pattern.subject, set()).add(pattern.object.value)
    return classes


def _within(slice: SchemaSlice, classes, allowed) -> bool:
    return all(any(slice.is_subclass(c, a) for a in allowed) for c in classes)


def check_types(query: SparqlQuery, slice: SchemaSlice) -> CheckResult:
    typed = _subject_classes(query)
    problems, warnings = [], []
    for pattern in query.where.all_patterns():
        predicate = pattern.predicate
        if not isinstance(predicate, IRI) or predicate.value == RDF_TYPE:
            continue
        p = predicate.value
        declared_domain = slice.declared_domains.get(p, set())
        inferred_domain = slice.domains.get(p, set()) - declared_domain
        subject_classes = typed.get(pattern.subject, set())
        if subject_classes and declared_domain and not _within(slice, subject_classes, declared_domain):
            problems.append(f"<{p}> expects subjects in {sorted(declared_domain)}, got {sorted(subject_classes)}")
        elif subject_classes and not declared_domain and inferred_domain:
            if not _within(slice, subject_classes, inferred_domain):
                warnings.append(f"<{p}> is only observed on {sorted(inferred_domain)}")

        declared_range = slice.declared_ranges.get(p, set())
        obj = pattern.object
        if declared_range:
            class_range = {r for r in declared_range if not _is_datatype(r)}
            if isinstance(obj, Literal) and not declared_range - class_range:
                problems.append(f"<{p}> expects a resource object, got the literal {obj.n3()}")
            elif isinstance(obj, IRI) and not class_range:
                problems.append(f"<{p}> expects a literal object, got <{obj.value}>")
            elif obj in typed and class_range and not _within(slice, typed[obj], class_range):
                problems.append(f"<{p}> expects objects in {sorted(class_range)}, got {sorted(typed[obj])}")
    if problems:
        return CheckResult(TYPE_COMPATIBILITY, "fail", "; ".join(problems))
    if warnings:
        return CheckResult(TYPE_COMPATIBILITY, "warn", "; ".join(warnings))
    return CheckResult(TYPE_COMPATIBILITY, "pass")


def verify_symbolic(
    query: Union[SparqlQuery, str], slice: SchemaSlice, executor
) -> Tuple[Optional[SparqlQuery], List[CheckResult]]:
    """Runs the four symbolic checks in order; the parsed query is returned alongside."""
    results = []
    try:
        parsed = parse_sparql(query) if isinstance(query, str) else query
        round_trip = parse_sparql(serialize_sparql(parsed))
        if round_trip != parsed:
            raise SparqlError("serialized query does not parse back to the same structure")
        results.append(CheckResult(SYNTAX, "pass"))
    except SparqlError as e:
        results.append(CheckResult(SYNTAX, "fail", str(e)))
        results.extend(CheckResult(check, "skipped") for check in CHECKS[1:])
        return None, results

    unknown = sorted(
        {
            p.predicate.value
            for p in parsed.where.all_patterns()
            if isinstance(p.predicate, IRI) and p.predicate.value not in slice.predicates
        }
    )
    if unknown:
        results.append(CheckResult(PREDICATE_EXISTENCE, "fail", "unknown predicates: " + ", ".join(f"<{p}>" for p in unknown)))
    else:
        results.append(CheckResult(PREDICATE_EXISTENCE, "pass"))

    results.append(check_types(parsed, slice))

    preliminary = parsed if parsed.form == ASK else parsed.evolve(limit=1)
    try:
        answer = executor.execute(preliminary)
        if answer.is_empty():
            results.append(CheckResult(NONEMPTY_PRELIMINARY, "fail", "empty answer set under current graph conditions"))
        else:
            results.append(CheckResult(NONEMPTY_PRELIMINARY, "pass"))
    except KGQAError as e:
        results.append(CheckResult(NONEMPTY_PRELIMINARY, "fail", f"execution failed: {e}"))
    return parsed, results


# stage 2


def _fresh(term: Term, executor, taken: set) -> Term:
    def build(suffix: str) -> Term:
        if isinstance(term, IRI):
            return IRI(f"{namespace_of(term.value)}{_FRESH}{local_name(term.value)}{_FRESH}{suffix}")
        return Literal(f"{_FRESH}{term.lexical}{_FRESH}{suffix}")

    counter = 0
    candidate = build("")
    while candidate in taken or (executor is not None and executor.contains_term(candidate)):
        counter += 1
        candidate = build(str(counter))
    taken.add(candidate)
    return candidate


def same_domain_predicate(predicate: str, slice: SchemaSlice) -> Optional[str]:
    """The lexicographically smallest other predicate sharing a domain class with ``predicate``."""
    domain = slice.domains.get(predicate, set())
    candidates = sorted(
        p
        for p, classes in slice.domains.items()
        if p != predicate and classes & domain and not p.startswith(_SCHEMA_VOCABULARY)
    )
    return candidates[0] if candidates else None


def _pattern_sites(query: SparqlQuery):
    blocks = [(-1, query.where.required)] + list(enumerate(query.where.optional))
    for block_index, block in blocks:
        for pattern_index, pattern in enumerate(block):
            yield block_index, pattern_index, pattern


def gen_perturbations(
    query: SparqlQuery, slice: SchemaSlice, m: int = DEFAULT_PERTURBATIONS, executor=None
) -> List[Perturbation]:
    if m < 1:
        raise ValueError("m must be at least 1")
    taken = set()
    sites = []
    for i, filter_ in enumerate(query.filters):
        for j, expr in enumerate(filter_.alternatives):
            if isinstance(expr.right, (IRI, Literal)):
                sites.append((REPLACE_FILTER_CONSTANT, ("filter", i, j), expr.right))
    for block_index, pattern_index, pattern in _pattern_sites(query):
        for position in ("subject", "object"):
            term = getattr(pattern, position)
            if isinstance(term, (IRI, Literal)):
                sites.append((REPLACE_ENTITY, ("pattern", block_index, pattern_index, position), term))
    for block_index, pattern_index, pattern in _pattern_sites(query):
        if isinstance(pattern.predicate, IRI) and pattern.predicate.value != RDF_TYPE:
            sites.append((REPLACE_PREDICATE, ("pattern", block_index, pattern_index, "predicate"), pattern.predicate))
    if not sites:
        raise NoPerturbableSite("the query has no constant to perturb")

    perturbations = []
    for kind, site, original in sites[:m]:
        if kind == REPLACE_PREDICATE:
            other = same_domain_predicate(original.value, slice)
            replacement = IRI(other) if other else _fresh(original, executor, taken)
        else:
            replacement = _fresh(original, executor, taken)
        perturbations.append(Perturbation(kind, site, original, replacement))
    return perturbations


def apply_perturbation(query: SparqlQuery, perturbation: Perturbation) -> SparqlQuery:
    site = perturbation.site
    if site[0] == "filter":
        _, i, j = site
        filter_ = query.filters[i]
        expr = filter_.alternatives[j]
        changed = FilterExpr(expr.operator, expr.left, perturbation.replacement, expr.flags)
        alternatives = filter_.alternatives[:j] + (changed,) + filter_.alternatives[j + 1 :]
        filters = query.filters[:i] + (Filter(alternatives),) + query.filters[i + 1 :]
        return query.evolve(filters=filters)

    _, block_index, pattern_index, position = site
    block = query.where.required if block_index < 0 else query.where.optional[block_index]
    pattern = block[pattern_index]
    terms = dict(zip(("subject", "predicate", "object"), pattern.terms))
    terms[position] = perturbation.replacement
    block = block[:pattern_index] + (TriplePattern(**terms),) + block[pattern_index + 1 :]
    if block_index < 0:
        where = GraphPattern(block, query.where.optional)
    else:
        optional = query.where.optional[:block_index] + (block,) + query.where.optional[block_index + 1 :]
        where = GraphPattern(query.where.required, optional)
    return query.evolve(where=where)


def verify_counterfactual(
    query: SparqlQuery, executor, perturbations: List[Perturbation]
) -> Tuple[List[CounterfactualResult], bool]:
    """Returns the per-perturbation results and whether the query is underspecified."""
    original = executor.execute(query).row_multiset()
    results = [
        CounterfactualResult(p, executor.execute(apply_perturbation(query, p)).row_multiset() != original)
        for p in perturbations
    ]
    return results, not any(r.changed for r in results)


def _revision(query: SparqlQuery, slice: SchemaSlice) -> Optional[SparqlQuery]:
    try:
        revised, log = posthoc_decode(query, slice)
    except Unrepairable:
        return None
    return revised if log.structural else None


def verify(
    query: Union[SparqlQuery, str],
    slice: SchemaSlice,
    executor,
    m: int = DEFAULT_PERTURBATIONS,
) -> VerificationReport:
    parsed, stage1 = verify_symbolic(query, slice, executor)
    report = VerificationReport(parsed, executor.graph_id, stage1)
    if any(result.failed for result in stage1):
        if report.failed_check == PREDICATE_EXISTENCE:
            report.suggested_revision = _revision(parsed, slice)
        logger.debug("query failed %s on %s", report.failed_check, executor.graph_id)
        return report
    try:
        perturbations = gen_perturbations(parsed, slice, m, executor)
    except NoPerturbableSite as e:
        report.verdict = FAIL_UNDERSPECIFIED
        report.note = str(e)
        return report
    except KGQAError as e:
        # fresh-constant lookups hit the graph too
        report.note = f"execution failure while perturbing constants: {e}"
        return report
    try:
        report.stage2, underspecified = verify_counterfactual(parsed, executor, perturbations)
    except KGQAError as e:
        report.stage2 = []
        report.note = f"execution failure during counterfactual testing: {e}"
        return report
    report.verdict = FAIL_UNDERSPECIFIED if underspecified else PASS
    return report
