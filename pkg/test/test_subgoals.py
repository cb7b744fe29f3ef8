import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.backend import AccountingBackend, RuleBackend
from multiKGQA.errors import ClarificationLoopExceeded, EmptyQuestion
from multiKGQA.lexicon import load_lexicon
from multiKGQA.subgoals import (
    AGGREGATION,
    AMBIGUOUS_INTENT,
    CO_OCCURRENCE,
    CONDITION_FILTER,
    ENTITY_LOOKUP,
    MISSING_CONSTRAINT,
    UNDERSPECIFIED_ENTITY,
    ClarificationRequest,
    Subgoal,
    SubgoalParser,
    apply_clarification,
    decompose,
    plan_from_json,
    plan_to_json,
    reformulate,
    rule_handler,
    validate_plan,
)

AMBIGUOUS_QUESTION = "For product code found in the resources, which trade codes co-occur with it?"


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon()


def test_co_occurrence_question_splits_in_two(lexicon):
    plan = decompose("Which trade codes co-occur with CPA code 011150?", lexicon)
    assert [subgoal.intent for subgoal in plan] == [ENTITY_LOOKUP, CO_OCCURRENCE]
    lookup, co_occurrence = plan
    assert lookup.entity_mentions == ["CPA code 011150"]
    assert lookup.literal_constraints == [("011150", "=")]
    assert lookup.entity_parts("CPA code 011150") == ("CPA code", "011150")
    assert co_occurrence.predicate_mentions == ["trade codes"]
    assert co_occurrence.depends_on == 1


def test_aggregation(lexicon):
    (subgoal,) = decompose("How many actors are in the registry?", lexicon)
    assert subgoal.intent == AGGREGATION
    assert subgoal.predicate_mentions == ["actors"]
    assert subgoal.class_mentions == ["actors"]
    assert subgoal.relation_mentions == []


def test_condition_filter(lexicon):
    (subgoal,) = decompose("Which actors have an employee count greater than 100?", lexicon)
    assert subgoal.intent == CONDITION_FILTER
    assert ("100", ">") in subgoal.literal_constraints
    assert subgoal.filter_constraints == [("100", ">")]
    assert "employee count" in subgoal.predicate_mentions


def test_underspecified_entity(lexicon):
    request = decompose(AMBIGUOUS_QUESTION, lexicon)
    assert isinstance(request, ClarificationRequest)
    assert request.kind == UNDERSPECIFIED_ENTITY
    assert request.readings == ("CPA code", "waste classification code")
    assert request.mention == "product code"
    assert request.rounds == 1


@pytest.mark.parametrize(
    "question, kind",
    [
        ("Actors in Berlin", AMBIGUOUS_INTENT),
        ("Which actors have an employee count greater than?", MISSING_CONSTRAINT),
    ],
)
def test_other_ambiguities(lexicon, question, kind):
    request = decompose(question, lexicon)
    assert isinstance(request, ClarificationRequest)
    assert request.kind == kind


@pytest.mark.parametrize("answer", ["CPA code 011150", "waste classification code"])
def test_clarified_question_decomposes(lexicon, answer):
    plan = apply_clarification(AMBIGUOUS_QUESTION, answer, lexicon=lexicon)
    assert len(plan) == 2
    assert plan[0].intent == ENTITY_LOOKUP
    assert plan[1].intent == CO_OCCURRENCE
    assert plan[1].depends_on == 1


def test_clarification_rounds(lexicon):
    again = apply_clarification(AMBIGUOUS_QUESTION, "product code", rounds=1, lexicon=lexicon)
    assert isinstance(again, ClarificationRequest)
    assert again.rounds == 2
    empty = apply_clarification(AMBIGUOUS_QUESTION, "  ", rounds=2, lexicon=lexicon)
    assert empty.rounds == 3
    with pytest.raises(ClarificationLoopExceeded):
        apply_clarification(AMBIGUOUS_QUESTION, "", rounds=3, lexicon=lexicon)


def test_reformulate_substitutes_the_mention(lexicon):
    request = decompose(AMBIGUOUS_QUESTION, lexicon)
    text = reformulate(AMBIGUOUS_QUESTION, request, "CPA code 011150")
    assert text.startswith("For CPA code 011150 found in the resources")
    intent_request = decompose("Actors in Berlin", lexicon)
    assert reformulate("Actors in Berlin", intent_request, "How many actors are in Berlin?") == (
        "How many actors are in Berlin?"
    )


@pytest.mark.parametrize("question", ["", "   "])
def test_empty_question(lexicon, question):
    with pytest.raises(EmptyQuestion):
        decompose(question, lexicon)
    with pytest.raises(EmptyQuestion):
        SubgoalParser(lexicon).decompose(question)


def test_plan_json_round_trip(lexicon):
    plan = decompose("Which trade codes co-occur with CPA code 011150?", lexicon)
    assert plan_from_json(plan_to_json(plan)) == plan
    request = decompose(AMBIGUOUS_QUESTION, lexicon)
    assert plan_from_json(plan_to_json(request)) == request


@pytest.mark.parametrize(
    "subgoals",
    [
        [],
        [Subgoal(2, ENTITY_LOOKUP, ["x"])],
        [Subgoal(1, "Guess", ["x"])],
        [Subgoal(1, ENTITY_LOOKUP)],
        [Subgoal(1, ENTITY_LOOKUP, ["x"], depends_on=1)],
        [Subgoal(1, ENTITY_LOOKUP, predicate_mentions=["a"], class_mentions=["b"])],
    ],
)
def test_invalid_plans(subgoals):
    with pytest.raises(ValueError):
        validate_plan(subgoals)


def test_parser_goes_through_the_backend(lexicon):
    backend = AccountingBackend(RuleBackend({"decompose": rule_handler(lexicon)}))
    plan = SubgoalParser(lexicon, backend).decompose("How many actors are in the registry?")
    assert plan[0].intent == AGGREGATION
    assert len(backend.responses) == 1
    assert backend.responses[0].role == "decompose"


def test_parser_falls_back_on_malformed_plans(lexicon):
    backend = AccountingBackend(RuleBackend({"decompose": lambda prompt: "not a plan"}))
    plan = SubgoalParser(lexicon, backend).decompose("How many actors are in the registry?")
    assert plan == decompose("How many actors are in the registry?", lexicon)


def test_single_subgoal_never_asks(lexicon):
    (subgoal,) = SubgoalParser(lexicon).single_subgoal("Which trade codes co-occur with CPA code 011150?")
    assert subgoal.id == 1
    assert subgoal.intent == CO_OCCURRENCE
    assert subgoal.depends_on is None
