import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.aggregator import (
    DROP,
    IRI_EQUAL,
    KEEP,
    LABEL_EXACT,
    SAMEAS_LINK,
    align_entities,
    fuse,
    identity_alignment,
)
from multiKGQA.backend import AccountingBackend, RuleBackend
from multiKGQA.errors import AllSubgoalsFailed
from multiKGQA.execution import AnswerSet
from multiKGQA.rdf import IRI, OWL_SAME_AS, RDFS_LABEL, XSD_BOOLEAN, Literal, Triple
from multiKGQA.sparql_parser import parse_sparql
from multiKGQA.triple_store import TripleStore

A = "http://a.example/"
B = "http://b.example/"
QUERY = parse_sparql("SELECT ?x WHERE { ?x ?p ?o }")


def _answer(graph_id, subgoal_id, rows, variables=None):
    variables = variables or sorted({name for row in rows for name in row})
    return AnswerSet(QUERY, graph_id, variables, rows, subgoal_id=subgoal_id)


def _store(graph_id, *triples):
    return TripleStore(graph_id, [Triple(*t) for t in triples])


def test_identical_terms_align():
    answers = [_answer("g1", 1, [{"x": IRI(A + "rice")}]), _answer("g2", 2, [{"y": IRI(A + "rice")}])]
    table = align_entities(answers, {"g1": None, "g2": None})
    assert [link.method for link in table.links] == [IRI_EQUAL]
    assert table.class_of("g1", IRI(A + "rice")) == frozenset({("g1", IRI(A + "rice")), ("g2", IRI(A + "rice"))})


def test_same_as_links_align():
    answers = [_answer("g1", 1, [{"x": IRI(B + "rice")}]), _answer("g2", 2, [{"y": IRI(A + "rice")}])]
    stores = {
        "g1": _store("g1", (IRI(B + "rice"), IRI(OWL_SAME_AS), IRI(A + "rice"))),
        "g2": _store("g2"),
    }
    table = align_entities(answers, stores)
    assert [link.method for link in table.links] == [SAMEAS_LINK]
    assert table.representative("g1", IRI(B + "rice")) == IRI(A + "rice")
    assert table.representative("g2", IRI(A + "rice")) == IRI(A + "rice")
    assert table.to_json()["links"][0]["method"] == SAMEAS_LINK


def test_labels_align_case_insensitively():
    answers = [_answer("g1", 1, [{"x": IRI(B + "m1")}]), _answer("g2", 2, [{"y": IRI(A + "m9")}])]
    stores = {
        "g1": _store("g1", (IRI(B + "m1"), IRI(RDFS_LABEL), Literal("Rice"))),
        "g2": _store("g2", (IRI(A + "m9"), IRI(RDFS_LABEL), Literal("rice"))),
    }
    table = align_entities(answers, stores)
    assert [link.method for link in table.links] == [LABEL_EXACT]
    assert table.representative("g1", IRI(B + "m1")) == IRI(A + "m9")


def test_unrelated_terms_stay_apart():
    answers = [_answer("g1", 1, [{"x": IRI(A + "rice")}, {"x": IRI(A + "wheat")}])]
    table = align_entities(answers, {"g1": _store("g1")})
    assert table.links == []
    assert len(table.classes) == 2
    assert len(identity_alignment(answers).classes) == 2


def test_fuse_merges_rows_and_provenance():
    answers = [
        _answer("g1", 1, [{"v": Literal("100610")}]),
        _answer("g2", 2, [{"v": Literal("100610")}]),
    ]
    consensus = fuse(answers, align_entities(answers, {}))
    assert consensus.rows == [{"v": Literal("100610")}]
    assert consensus.provenance == [[("g1", 1), ("g2", 2)]]
    assert consensus.answer_text == "v is 100610 (source: g1, g2)"
    assert consensus.conflicts == []


@pytest.mark.parametrize("policy, n_rows", [(KEEP, 2), (DROP, 0)])
def test_conflicting_values(policy, n_rows):
    answers = [
        _answer("g1", 1, [{"m": IRI(A + "rice"), "q": Literal("5")}]),
        _answer("g2", 2, [{"m": IRI(A + "rice"), "q": Literal("7")}]),
    ]
    consensus = fuse(answers, align_entities(answers, {}), conflict_policy=policy)
    (conflict,) = consensus.conflicts
    assert conflict.variable == "q"
    assert conflict.values == (Literal("5"), Literal("7"))
    assert conflict.graph_ids == ("g1", "g2")
    assert len(consensus.rows) == n_rows
    if not n_rows:
        assert consensus.answer_text == "No answer was found."


def test_no_answer_sets():
    with pytest.raises(AllSubgoalsFailed):
        fuse([], identity_alignment([]))


def test_empty_answer_sets():
    consensus = fuse([_answer("g1", 1, [], ["x"])], identity_alignment([]))
    assert consensus.rows == []
    assert consensus.variables == ["x"]
    assert consensus.answer_text == "No answer was found."


def test_boolean_answers():
    answer = AnswerSet(parse_sparql("ASK { ?s ?p ?o }"), "g1", [], True, subgoal_id=1)
    consensus = fuse([answer], identity_alignment([answer]))
    assert consensus.variables == ["answer"]
    assert consensus.rows == [{"answer": Literal("true", datatype=XSD_BOOLEAN)}]


def test_long_value_lists_are_shortened():
    answers = [_answer("g1", 1, [{"v": Literal(str(i))} for i in range(25)])]
    consensus = fuse(answers, identity_alignment(answers))
    assert consensus.answer_text.endswith("and 5 more (source: g1)")


def test_summary_goes_through_the_backend():
    backend = AccountingBackend(RuleBackend())
    answers = [_answer("g1", 1, [{"v": Literal("100610")}])]
    consensus = fuse(answers, identity_alignment(answers), backend=backend)
    assert consensus.answer_text == "v is 100610 (source: g1)"
    assert [response.role for response in backend.responses] == ["summarize"]
    assert consensus.to_json()["provenance"] == [[{"graph_id": "g1", "subgoal_id": 1}]]
