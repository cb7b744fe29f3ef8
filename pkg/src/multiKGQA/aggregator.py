"""Entity alignment across per-subgoal answer sets and fusion into one consensus answer."""
import logging
from typing import Dict, List, Optional, Tuple

from attr import Factory, dataclass
from networkx.utils import UnionFind

from multiKGQA.backend import build_prompt
from multiKGQA.errors import AllSubgoalsFailed
from multiKGQA.execution import AnswerSet, canonical_row, term_to_json
from multiKGQA.rdf import IRI, OWL_SAME_AS, RDFS_LABEL, XSD_BOOLEAN, BlankNode, Literal, Term
from multiKGQA.triple_store import TripleStore

logger = logging.getLogger(__name__)

IRI_EQUAL = "iri-equal"
SAMEAS_LINK = "sameas-link"
LABEL_EXACT = "label-exact"

KEEP = "keep"
DROP = "drop"

MAX_LISTED_VALUES = 20

Member = Tuple[str, Term]


@dataclass(frozen=True)
class Link:
    left: Member
    right: Member
    method: str


@dataclass
class AlignmentTable:
    classes: List[frozenset] = Factory(list)
    links: List[Link] = Factory(list)
    _representatives: Dict[Member, Term] = Factory(dict)

    def __attrs_post_init__(self):
        for members in self.classes:
            representative = representative_of(members)
            for member in members:
                self._representatives[member] = representative

    def representative(self, graph_id: str, term: Term) -> Term:
        return self._representatives.get((graph_id, term), term)

    def class_of(self, graph_id: str, term: Term) -> frozenset:
        for members in self.classes:
            if (graph_id, term) in members:
                return members
        return frozenset({(graph_id, term)})

    def to_json(self) -> dict:
        return {
            "classes": [
                sorted(f"{graph_id} {term.n3()}" for graph_id, term in members)
                for members in self.classes
                if len(members) > 1
            ],
            "links": [
                {"left": f"{l.left[0]} {l.left[1].n3()}", "right": f"{l.right[0]} {l.right[1].n3()}", "method": l.method}
                for l in self.links
            ],
        }


def _term_order(term: Term):
    if isinstance(term, IRI):
        return (0, term.value)
    if isinstance(term, Literal):
        return (1, term.n3())
    return (2, term.n3())


def representative_of(members) -> Term:
    """The lexicographically smallest IRI of a class; literals only when it holds no IRI."""
    return min((term for _, term in members), key=_term_order)


def _members(answers: List[AnswerSet]) -> List[Member]:
    seen = {}
    for answer in answers:
        if answer.is_boolean:
            continue
        for row in answer.rows:
            for variable, term in row.items():
                seen.setdefault((answer.source_of(variable), term), None)
    return list(seen)


def _labels(store: Optional[TripleStore], iri: IRI) -> set:
    if store is None:
        return set()
    return {
        t.object.lexical.casefold()
        for t in store.match(subject=iri, predicate=IRI(RDFS_LABEL))
        if isinstance(t.object, Literal)
    }


def align_entities(answers: List[AnswerSet], stores: Dict[str, TripleStore]) -> AlignmentTable:
    """Union-find over identical terms, then owl:sameAs triples, then exact case-folded labels."""
    members = _members(answers)
    union = UnionFind(members)
    links = []

    def link(left: Member, right: Member, method: str):
        if union[left] != union[right]:
            union.union(left, right)
            links.append(Link(left, right, method))

    by_term: Dict[Term, List[Member]] = {}
    for member in members:
        by_term.setdefault(member[1], []).append(member)
    for group in by_term.values():
        for other in group[1:]:
            link(group[0], other, IRI_EQUAL)

    same_as = IRI(OWL_SAME_AS)
    for member in members:
        term = member[1]
        if not isinstance(term, IRI):
            continue
        for store in (stores[g] for g in sorted(stores) if stores[g] is not None):
            linked = {t.object for t in store.match(subject=term, predicate=same_as)}
            linked |= {t.subject for t in store.match(predicate=same_as, obj=term)}
            for other in sorted(linked, key=_term_order):
                for target in by_term.get(other, []):
                    link(member, target, SAMEAS_LINK)

    by_label: Dict[str, List[Member]] = {}
    for member in members:
        if isinstance(member[1], IRI):
            for label in sorted(_labels(stores.get(member[0]), member[1])):
                by_label.setdefault(label, []).append(member)
    for group in by_label.values():
        for other in group[1:]:
            link(group[0], other, LABEL_EXACT)

    classes = [frozenset(group) for group in union.to_sets()]
    classes.sort(key=lambda c: _term_order(representative_of(c)))
    return AlignmentTable(classes, links)


def identity_alignment(answers: List[AnswerSet]) -> AlignmentTable:
    return AlignmentTable([frozenset({member}) for member in _members(answers)], [])


@dataclass(frozen=True)
class Conflict:
    variable: str
    values: Tuple[Term, ...]
    graph_ids: Tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "variable": self.variable,
            "values": [term_to_json(v) for v in self.values],
            "graph_ids": list(self.graph_ids),
        }


@dataclass
class ConsensusAnswer:
    variables: List[str]
    rows: List[Dict[str, Term]]
    answer_text: str
    provenance: List[List[Tuple[str, int]]]
    conflicts: List[Conflict] = Factory(list)

    def to_json(self) -> dict:
        return {
            "rows": {
                "head": {"vars": list(self.variables)},
                "results": {
                    "bindings": [{name: term_to_json(t) for name, t in row.items()} for row in self.rows]
                },
            },
            "answer_text": self.answer_text,
            "provenance": [[{"graph_id": g, "subgoal_id": s} for g, s in chain] for chain in self.provenance],
            "conflicts": [conflict.to_json() for conflict in self.conflicts],
        }


def _text(term: Term) -> str:
    if isinstance(term, IRI):
        return term.value
    if isinstance(term, BlankNode):
        return term.n3()
    return term.lexical


def _variables_of(answer: AnswerSet) -> List[str]:
    return ["answer"] if answer.is_boolean else answer.variables


def _rows_of(answer: AnswerSet) -> List[Dict[str, Term]]:
    if answer.is_boolean:
        return [{"answer": Literal("true" if answer.rows else "false", datatype=XSD_BOOLEAN)}]
    return answer.rows


def _find_conflicts(fused: List[Tuple[Dict[str, Term], AnswerSet]]) -> List[Tuple[Conflict, List[int]]]:
    """Rows of different graphs with the same variables that agree on all but one of them."""
    found = {}
    for i, (row, answer) in enumerate(fused):
        if len(row) < 2:
            continue
        for j in range(i + 1, len(fused)):
            other, other_answer = fused[j]
            if set(other) != set(row) or other_answer.graph_id == answer.graph_id:
                continue
            differing = [v for v in sorted(row) if row[v] != other[v]]
            if len(differing) != 1:
                continue
            variable = differing[0]
            key = (variable, tuple(sorted((row[v].n3() for v in row if v != variable))))
            entry = found.setdefault(key, ({}, set(), set()))
            entry[0][row[variable]] = None
            entry[0][other[variable]] = None
            entry[1].update({answer.source_of(variable), other_answer.source_of(variable)})
            entry[2].update({i, j})
    return [
        (Conflict(variable, tuple(values), tuple(sorted(graphs))), sorted(indices))
        for (variable, _), (values, graphs, indices) in sorted(found.items(), key=lambda kv: kv[0])
    ]


def fuse(
    answers: List[AnswerSet],
    table: AlignmentTable,
    backend=None,
    conflict_policy: str = KEEP,
) -> ConsensusAnswer:
    if not answers:
        raise AllSubgoalsFailed("no subgoal produced an answer set")
    rewritten: List[Tuple[Dict[str, Term], AnswerSet]] = []
    for answer in answers:
        for row in _rows_of(answer):
            mapped = {v: table.representative(answer.source_of(v), t) for v, t in row.items()}
            rewritten.append((mapped, answer))

    conflicts = _find_conflicts(rewritten)
    dropped = set()
    if conflict_policy == DROP:
        for _, indices in conflicts:
            dropped.update(indices)

    variables: Dict[str, None] = {}
    for answer in answers:
        for name in _variables_of(answer):
            variables.setdefault(name, None)

    rows, provenance, index_of = [], [], {}
    for position, (row, answer) in enumerate(rewritten):
        if position in dropped:
            continue
        key = canonical_row(row)
        if key not in index_of:
            index_of[key] = len(rows)
            rows.append(row)
            provenance.append([])
        chain = provenance[index_of[key]]
        for link in answer.chain():
            if link not in chain:
                chain.append(link)

    facts = _facts(list(variables), rows, answers)
    if not facts:
        text = "No answer was found."
    elif backend is None:
        text = "; ".join(facts)
    else:
        response = backend.request("summarize", build_prompt("Summarize the facts as one answer.", facts="\n".join(facts)))
        text = response.text if not response.refused else "; ".join(facts)
    return ConsensusAnswer(list(variables), rows, text, provenance, [c for c, _ in conflicts])


def _facts(variables: List[str], rows: List[Dict[str, Term]], answers: List[AnswerSet]) -> List[str]:
    facts = []
    for variable in variables:
        values = {}
        for row in rows:
            if variable in row:
                values.setdefault(_text(row[variable]), None)
        if not values:
            continue
        graphs = sorted(
            {answer.source_of(variable) for answer in answers if variable in _variables_of(answer)}
        )
        listed = list(values)
        text = ", ".join(listed[:MAX_LISTED_VALUES])
        if len(listed) > MAX_LISTED_VALUES:
            text += f" and {len(listed) - MAX_LISTED_VALUES} more"
        facts.append(f"{variable} is {text} (source: {', '.join(graphs)})")
    return facts
