import json
import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.allocator import AllocationDecision, allocate
from multiKGQA.errors import ConfigError, IncompatibleTyping, NoTemplate, UngroundableSlot, Unrepairable
from multiKGQA.fixtures import EU_PILOT, EUP, GERMAN_IS, GIS, RICE_CPA, RICE_HS, WASTE_LEDGER, WL
from multiKGQA.lexicon import load_lexicon
from multiKGQA.rdf import IRI, Literal
from multiKGQA.sparql_ast import serialize_sparql
from multiKGQA.sparql_parser import parse_sparql
from multiKGQA.subgoals import (
    AGGREGATION,
    CO_OCCURRENCE,
    COMPARISON,
    CONDITION_FILTER,
    ENTITY_LOOKUP,
    Subgoal,
)
from multiKGQA.synthesizer import (
    COSMETIC,
    STRUCTURAL,
    Synthesizer,
    ground,
    posthoc_decode,
    select_template,
    subgoal_arity,
    synthesize,
)
from multiKGQA.templates import QueryTemplate, TemplateLibrary, check_template, load_templates

HEADER = f"PREFIX eup: <{EUP}>\nPREFIX wl: <{WL}>\n"
RICE = IRI(f"{EUP}material/cpa-{RICE_CPA}")


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon()


def _values(answer, variable):
    return {row[variable] for row in answer.rows}


def test_template_library_is_well_formed():
    library = load_templates()
    assert len(library) > 0
    for template in library:
        assert check_template(template) is template


@pytest.mark.parametrize(
    "template",
    [
        QueryTemplate("bad-intent", "Guess", 0, "SELECT ?x WHERE { ?x a {C} }", {"C": "class"}),
        QueryTemplate("bad-slots", ENTITY_LOOKUP, 0, "SELECT ?x WHERE { ?x a {C} }", {"D": "class"}),
        QueryTemplate("bad-kind", ENTITY_LOOKUP, 0, "SELECT ?x WHERE { ?x a {C} }", {"C": "colour"}),
        QueryTemplate("bad-sparql", ENTITY_LOOKUP, 0, "SELECT ?x WHERE { ?x a {C} ", {"C": "class"}),
    ],
)
def test_bad_templates(template):
    with pytest.raises(ConfigError):
        check_template(template)


def test_duplicate_templates():
    template = QueryTemplate("a", ENTITY_LOOKUP, 0, "SELECT ?x WHERE { ?x a {C} }", {"C": "class"})
    with pytest.raises(ConfigError):
        TemplateLibrary([template, template])


def test_unreadable_template_file(tmp_path):
    path = tmp_path / "templates.json"
    path.write_text(json.dumps([{"id": "x"}]))
    with pytest.raises(ConfigError):
        load_templates(str(path))


@pytest.mark.parametrize(
    "subgoal, template_id",
    [
        (Subgoal(1, ENTITY_LOOKUP, ["CPA code 011150"], literal_constraints=[("011150", "=")]), "entity-lookup-1"),
        (Subgoal(1, AGGREGATION, predicate_mentions=["actors"], class_mentions=["actors"]), "aggregation-0"),
        (
            Subgoal(1, CONDITION_FILTER, predicate_mentions=["employee count"], literal_constraints=[("100", ">")]),
            "condition-filter-1",
        ),
        (Subgoal(2, CO_OCCURRENCE, predicate_mentions=["HS codes"], depends_on=1), "co-occurrence-1"),
    ],
)
def test_template_selection(subgoal, template_id):
    assert select_template(subgoal).id == template_id


def test_no_template():
    subgoal = Subgoal(1, COMPARISON, predicate_mentions=["actors"], class_mentions=["actors"])
    assert subgoal_arity(subgoal) == 0
    with pytest.raises(NoTemplate):
        select_template(subgoal)


def test_grounded_lookup_executes(shared_registry, lexicon):
    subgoal = Subgoal(1, ENTITY_LOOKUP, ["CPA code 011150"], literal_constraints=[("011150", "=")])
    decision = allocate(subgoal, shared_registry, lexicon)
    assert decision.graph_id == EU_PILOT
    entry = shared_registry.get(EU_PILOT)
    query, repairs = synthesize(subgoal, decision, entry.schema, lexicon)
    assert len(repairs) == 0
    text = serialize_sparql(query)
    assert "cpaCode" in text and '"011150"' in text
    assert _values(entry.executor().execute(query), "x") == {RICE}


def test_threshold_is_typed_by_the_range(shared_registry, lexicon):
    subgoal = Subgoal(
        1,
        CONDITION_FILTER,
        predicate_mentions=["employee count"],
        literal_constraints=[("100", ">")],
    )
    decision = AllocationDecision(1, GERMAN_IS, (), {"employee count": GIS + "employeeCount"})
    slice = shared_registry.get(GERMAN_IS).schema
    query = ground(select_template(subgoal), subgoal, decision, slice, lexicon)
    (filter_,) = query.filters
    assert filter_.alternatives[0].right.is_numeric
    assert IRI(GIS + "Actor") in query.where.required[0].terms


def test_dependent_subgoal_fans_out_over_prior_values(shared_registry, lexicon):
    lookup = Subgoal(1, ENTITY_LOOKUP, ["CPA code 011150"], literal_constraints=[("011150", "=")])
    pilot = shared_registry.get(EU_PILOT)
    first = Synthesizer(lexicon=lexicon).synthesize(lookup, allocate(lookup, shared_registry, lexicon), pilot.schema)
    prior = pilot.executor().execute(first.queries[0])

    co_occurrence = Subgoal(2, CO_OCCURRENCE, predicate_mentions=["HS codes"], depends_on=1)
    decision = AllocationDecision(2, WASTE_LEDGER, (), {"HS codes": WL + "hsCode"})
    ledger = shared_registry.get(WASTE_LEDGER)
    second = Synthesizer(lexicon=lexicon).synthesize(co_occurrence, decision, ledger.schema, prior)
    assert second.bound_values == [RICE]
    (query,) = second.queries
    assert _values(ledger.executor().execute(query), "v") == {Literal(RICE_HS)}


def test_fan_out_folds_above_the_cap(shared_registry, lexicon):
    ledger = shared_registry.get(WASTE_LEDGER)
    prior = ledger.executor().execute(parse_sparql(HEADER + "SELECT DISTINCT ?m WHERE { ?f wl:material ?m }"))
    assert len(prior.rows) > 1
    co_occurrence = Subgoal(2, CO_OCCURRENCE, predicate_mentions=["HS codes"], depends_on=1)
    decision = AllocationDecision(2, WASTE_LEDGER, (), {"HS codes": WL + "hsCode"})
    result = Synthesizer(lexicon=lexicon, fan_out_cap=1).synthesize(co_occurrence, decision, ledger.schema, prior)
    (folded,) = result.queries
    assert result.bound_values == [None]
    assert "value" in [v.name for v in folded.projection]
    assert RICE in _values(ledger.executor().execute(folded), "value")


def test_empty_prior_gives_no_queries(shared_registry, lexicon):
    ledger = shared_registry.get(WASTE_LEDGER)
    prior = ledger.executor().execute(parse_sparql(HEADER + 'SELECT ?m WHERE { ?f wl:material ?m . ?f wl:hsCode "0" }'))
    co_occurrence = Subgoal(2, CO_OCCURRENCE, predicate_mentions=["HS codes"], depends_on=1)
    decision = AllocationDecision(2, WASTE_LEDGER, (), {"HS codes": WL + "hsCode"})
    result = Synthesizer(lexicon=lexicon).synthesize(co_occurrence, decision, ledger.schema, prior)
    assert result.queries == []


def test_ungroundable_slot(shared_registry, lexicon):
    subgoal = Subgoal(1, ENTITY_LOOKUP, predicate_mentions=["zebra"], literal_constraints=[("x", "=")])
    decision = AllocationDecision(1, WASTE_LEDGER, ())
    with pytest.raises(UngroundableSlot) as info:
        ground(select_template(subgoal), subgoal, decision, shared_registry.get(WASTE_LEDGER).schema, lexicon)
    assert info.value.slot == "PRED_1"
    assert info.value.mention == "zebra"


def test_incompatible_typing(shared_registry, lexicon):
    subgoal = Subgoal(
        1,
        ENTITY_LOOKUP,
        predicate_mentions=["resources", "actor name"],
        class_mentions=["resources"],
    )
    decision = AllocationDecision(1, GERMAN_IS, (), {"resources": GIS + "Resource", "actor name": GIS + "actorName"})
    with pytest.raises(IncompatibleTyping) as info:
        ground(select_template(subgoal), subgoal, decision, shared_registry.get(GERMAN_IS).schema, lexicon)
    assert info.value.predicate == GIS + "actorName"


def test_posthoc_repairs_a_near_miss_predicate(shared_registry):
    slice = shared_registry.get(WASTE_LEDGER).schema
    query, log = posthoc_decode(HEADER + "SELECT ?c WHERE { ?f wl:material ?m . ?f wl:hsCodes ?c }", slice)
    assert len(log.structural) == 1
    (entry,) = log.entries
    assert entry.rule == "predicate-replacement"
    assert entry.after.endswith("hsCode>") or entry.after.endswith(":hsCode")
    assert IRI(WL + "hsCode") in query.where.required[1].terms
    assert log.to_json()["entries"][0]["severity"] == STRUCTURAL


def test_posthoc_injects_known_prefixes(shared_registry):
    slice = shared_registry.get(WASTE_LEDGER).schema
    query, log = posthoc_decode("SELECT ?l WHERE { ?x rdfs:label ?l }", slice)
    assert [entry.severity for entry in log.entries] == [COSMETIC]
    assert "rdfs" in query.prefixes


def test_posthoc_drops_constant_patterns(shared_registry):
    slice = shared_registry.get(WASTE_LEDGER).schema
    text = HEADER + f'SELECT ?q WHERE {{ ?f wl:quantity ?q . <{WL}flow/f0000> wl:originCountry "Poland" }}'
    query, log = posthoc_decode(text, slice)
    assert [entry.rule for entry in log.entries] == ["constant-pattern"]
    assert len(query.where.required) == 1


@pytest.mark.parametrize(
    "text, rule",
    [
        (HEADER + "SELECT ?c WHERE { ?f wl:colour ?c }", "predicate-existence"),
        (HEADER + "SELECT ?f WHERE { ?f a wl:Spaceship }", "class-existence"),
        ("SELECT ?c WHERE { ?f foo:bar ?c }", "prefix-resolution"),
        (HEADER + "SELECT ?c WHERE { ?f wl:hsCode ?c ", "syntax"),
        (HEADER + "SELECT ?c WHERE { ?f wl:hsCode ?d }", "variable-binding"),
    ],
)
def test_unrepairable(shared_registry, text, rule):
    with pytest.raises(Unrepairable) as info:
        posthoc_decode(text, shared_registry.get(WASTE_LEDGER).schema)
    assert info.value.rule == rule
