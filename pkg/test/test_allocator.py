import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.allocator import (
    TERM_OVERLAP,
    AllocationWeights,
    align,
    allocate,
    allocate_by_term_overlap,
    ground_mention,
    weak_retrieve,
)
from multiKGQA.corpus import load_corpus
from multiKGQA.errors import NoViableGraph
from multiKGQA.fixtures import EU_PILOT, EUP, GERMAN_IS, GIS, GRAPH_FILES, REGISTER_MIRROR, WASTE_LEDGER, WL
from multiKGQA.lexicon import load_lexicon
from multiKGQA.registry import FILE, GraphRegistry, load_registry
from multiKGQA.subgoals import AGGREGATION, CO_OCCURRENCE, ENTITY_LOOKUP, ClarificationRequest, Subgoal, decompose


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon()


@pytest.mark.parametrize(
    "kwargs",
    [{"k": 0}, {"weak": -0.1}, {"utility": -1.0}],
)
def test_weight_validation(kwargs):
    with pytest.raises(ValueError):
        AllocationWeights(**kwargs)


@pytest.mark.parametrize(
    "subgoal, expected",
    [
        (Subgoal(1, CO_OCCURRENCE, ["rice"], ["HS codes"]), WASTE_LEDGER),
        (Subgoal(1, AGGREGATION, predicate_mentions=["cases", "region"], class_mentions=["cases"]), EU_PILOT),
        (Subgoal(1, ENTITY_LOOKUP, predicate_mentions=["actors", "employee count"], class_mentions=["actors"]), GERMAN_IS),
    ],
)
def test_allocate(shared_registry, lexicon, subgoal, expected):
    decision = allocate(subgoal, shared_registry, lexicon)
    assert decision.graph_id == expected
    assert decision.ranking[0].graph_id == expected
    assert [c.combined for c in decision.ranking] == sorted((c.combined for c in decision.ranking), reverse=True)
    assert expected not in decision.fallbacks


def test_grounding(shared_registry, lexicon):
    subgoal = Subgoal(1, ENTITY_LOOKUP, ["CPA code 011150"], literal_constraints=[("011150", "=")])
    score, grounding = align(subgoal, shared_registry.get(EU_PILOT), lexicon)
    assert score == 1.0
    assert grounding["CPA code"] == EUP + "cpaCode"
    assert grounding["CPA code 011150"] == EUP + "cpaCode"


def test_ground_mention_uses_labels_and_cache(shared_registry):
    entry = shared_registry.get(GERMAN_IS)
    cache = {}
    assert ground_mention("actors", "class", entry.schema, cache) == (GIS + "Actor", 1.0)
    assert ground_mention("employee count", "predicate", entry.schema, cache) == (GIS + "employeeCount", 1.0)
    assert len(cache) == 2
    assert ground_mention("zebra", "predicate", entry.schema, cache) == (None, 0.0)


def test_grounding_follows_the_slice_labels(shared_registry, lexicon):
    subgoal = Subgoal(1, CO_OCCURRENCE, predicate_mentions=["HS codes", "trade codes"])
    score, grounding = align(subgoal, shared_registry.get(WASTE_LEDGER), lexicon)
    assert grounding == {"HS codes": WL + "hsCode"}
    assert score == pytest.approx(0.5)


def test_weak_tier_keeps_top_k(shared_registry):
    subgoal = Subgoal(1, CO_OCCURRENCE, ["rice"], ["HS codes"])
    ranked = weak_retrieve(subgoal, shared_registry, k=2)
    assert len(ranked) == 2
    assert ranked[0][0] == WASTE_LEDGER
    assert all(0.0 <= score <= 1.0 for _, score in ranked)
    with pytest.raises(ValueError):
        weak_retrieve(subgoal, shared_registry, k=0)


def test_ties_go_to_the_smaller_graph_id(fixtures_dir, lexicon):
    registry = GraphRegistry()
    path = os.path.join(fixtures_dir, GRAPH_FILES[EU_PILOT])
    registry.register_graph("pilot_b", FILE, path, metadata="materials and cases")
    registry.register_graph("pilot_a", FILE, path, metadata="materials and cases")
    # rice is only reachable through the lexicon, so both copies score exactly alike
    decision = allocate(Subgoal(1, ENTITY_LOOKUP, ["rice"]), registry, lexicon)
    assert decision.graph_id == "pilot_a"
    assert decision.fallbacks == ["pilot_b"]
    assert decision.for_graph("pilot_b").graph_id == "pilot_b"


def test_no_viable_graph(shared_registry, lexicon):
    with pytest.raises(NoViableGraph):
        allocate(Subgoal(1, ENTITY_LOOKUP, predicate_mentions=["zebra giraffe"]), shared_registry, lexicon)
    with pytest.raises(NoViableGraph):
        allocate(Subgoal(1, ENTITY_LOOKUP, predicate_mentions=["actors"]), GraphRegistry(), lexicon)


def test_term_overlap_fallback(shared_registry):
    decision = allocate_by_term_overlap(Subgoal(1, CO_OCCURRENCE, ["rice"], ["HS codes"]), shared_registry)
    assert decision.method == TERM_OVERLAP
    assert decision.graph_id == WASTE_LEDGER
    assert decision.grounding == {}


def test_term_overlap_is_misled_by_keyword_metadata(faults_registry_path, lexicon):
    registry = load_registry(faults_registry_path)
    subgoal = Subgoal(1, ENTITY_LOOKUP, predicate_mentions=["actors", "employee count"], class_mentions=["actors"])
    assert allocate_by_term_overlap(subgoal, registry).graph_id == REGISTER_MIRROR
    decision = allocate(subgoal, registry, lexicon)
    assert decision.graph_id == GERMAN_IS
    assert REGISTER_MIRROR in decision.fallbacks


def test_allocation_accuracy_on_single_graph_items(shared_registry, corpus_path, lexicon):
    checked = 0
    for item in load_corpus(corpus_path):
        if len(item.gold_graphs) != 1:
            continue
        plan = decompose(item.question, lexicon)
        assert not isinstance(plan, ClarificationRequest), item.id
        for subgoal in plan:
            assert allocate(subgoal, shared_registry, lexicon).graph_id == item.gold_graphs[0], (item.id, subgoal)
            checked += 1
    assert checked > 0
