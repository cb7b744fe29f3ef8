import os
import random
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.corpus import load_corpus
from multiKGQA.errors import SparqlError, SparqlSyntaxError, UnboundVariable, UndefinedPrefix
from multiKGQA.rdf import IRI, RDF_TYPE, XSD_INTEGER, Literal
from multiKGQA.sparql_ast import (
    ASK,
    REGEX,
    SELECT,
    CountAggregate,
    OrderKey,
    TriplePattern,
    Variable,
    serialize_sparql,
    triple_patterns_of,
)
from multiKGQA.sparql_parser import is_valid_sparql, parse_sparql

EX = "http://example.org/"
HEADER = f"PREFIX ex: <{EX}>\n"

VALID_QUERIES = [
    HEADER + "SELECT ?x WHERE { ?x a ex:Actor }",
    HEADER + "SELECT DISTINCT ?x ?n WHERE { ?x ex:name ?n . ?x ex:city \"Berlin\" . }",
    HEADER + "ASK { ?x ex:size 42 }",
    HEADER + 'SELECT * WHERE { ?x ex:name ?n OPTIONAL { ?x ex:city ?c } FILTER(?n = "a" || ?n = "b") }',
    HEADER + "SELECT ?c (COUNT(DISTINCT ?x) AS ?n) WHERE { ?x ex:city ?c } GROUP BY ?c ORDER BY DESC(?n) LIMIT 3",
    HEADER + 'SELECT ?x WHERE { ?x ex:name ?n FILTER(REGEX(?n, "^nord", "i")) }',
    HEADER + 'SELECT ?x WHERE { ?x ex:label ?l FILTER(LANG(?l) = "de") }',
    "SELECT (COUNT(*) AS ?n) WHERE { ?s ?p ?o }",
]


def test_basic_select():
    query = parse_sparql(VALID_QUERIES[0])
    assert query.form == SELECT
    assert query.projection == (Variable("x"),)
    assert query.where.required == (TriplePattern(Variable("x"), IRI(RDF_TYPE), IRI(EX + "Actor")),)
    assert query.prefix_map == {"ex": EX}


def test_ask_with_number():
    query = parse_sparql(VALID_QUERIES[2])
    assert query.form == ASK
    assert query.where.required[0].object == Literal("42", datatype=XSD_INTEGER)
    assert query.output_variables() == []


def test_optional_and_disjunction():
    query = parse_sparql(VALID_QUERIES[3])
    assert query.projection is None
    assert len(query.where.optional) == 1
    assert len(query.filters) == 1
    assert len(query.filters[0].alternatives) == 2
    assert query.output_variables() == [Variable("x"), Variable("n"), Variable("c")]


def test_modifiers():
    query = parse_sparql(VALID_QUERIES[4])
    assert query.projection[1] == CountAggregate(Variable("n"), Variable("x"), distinct=True)
    assert query.group_by == (Variable("c"),)
    assert query.order_by == (OrderKey(Variable("n"), descending=True),)
    assert query.limit == 3


def test_regex_flags():
    query = parse_sparql(VALID_QUERIES[5])
    expr = query.filters[0].alternatives[0]
    assert expr.operator == REGEX
    assert expr.right == "^nord"
    assert expr.flags == "i"


@pytest.mark.parametrize(
    "text, error",
    [
        ("SELECT ?x WHERE { ?x a }", SparqlSyntaxError),
        ("SELECT ?x WHERE { ?x a ex:Actor", SparqlSyntaxError),
        ("SELEC ?x WHERE { ?x ?p ?o }", SparqlSyntaxError),
        ("SELECT ?x WHERE { ?x <relative> ?o }", SparqlSyntaxError),
        ('SELECT ?x WHERE { ?x ?p ?o FILTER(REGEX(?o, "(")) }', SparqlSyntaxError),
        (HEADER + HEADER + "SELECT ?x WHERE { ?x ?p ?o }", SparqlSyntaxError),
        ("SELECT ?x WHERE { ?x a foo:Bar }", UndefinedPrefix),
        ("SELECT ?y WHERE { ?x ?p ?o }", UnboundVariable),
        ("SELECT ?x WHERE { ?x ?p ?o FILTER(?z = 1) }", UnboundVariable),
        ("SELECT ?x (COUNT(*) AS ?n) WHERE { ?x ?p ?o }", UnboundVariable),
        ("SELECT ?x WHERE { ?x ?p ?o } ORDER BY ?q", UnboundVariable),
    ],
)
def test_diagnostics(text, error):
    with pytest.raises(error):
        parse_sparql(text)
    assert not is_valid_sparql(text)


def test_syntax_error_position():
    with pytest.raises(SparqlSyntaxError) as info:
        parse_sparql("SELECT ?x WHERE { ?x a }")
    assert 0 < info.value.position <= len("SELECT ?x WHERE { ?x a }")


@pytest.mark.parametrize("text", VALID_QUERIES)
def test_serialize_round_trip(text):
    query = parse_sparql(text)
    assert parse_sparql(serialize_sparql(query)) == query


def test_serialize_uses_prefixes_and_keyword_a():
    text = serialize_sparql(parse_sparql(VALID_QUERIES[0]))
    assert "?x a ex:Actor ." in text
    assert text.startswith(f"PREFIX ex: <{EX}>")


def test_corpus_gold_queries_round_trip(corpus_path):
    items = [item for item in load_corpus(corpus_path) if item.gold_query]
    assert items
    for item in items:
        query = parse_sparql(item.gold_query)
        assert parse_sparql(serialize_sparql(query)) == query, item.id


def test_triple_patterns_ignore_variable_names():
    first = parse_sparql(HEADER + "SELECT ?a WHERE { ?a ex:p ?b . ?b ex:q ?c }")
    second = parse_sparql(HEADER + "SELECT ?x WHERE { ?x ex:p ?y . ?y ex:q ?z FILTER(?z != 1) }")
    assert triple_patterns_of(first) == triple_patterns_of(second)


FUZZ_TOKENS = [
    "{", "}", ".", ";", ",", "(", ")", "<", ">", '"', "?", "?x", "$y", ":", "ex:", "a", "*",
    "PREFIX", "SELECT", "ASK", "WHERE", "OPTIONAL", "FILTER", "REGEX", "LANG", "COUNT",
    "DISTINCT", "AS", "GROUP", "ORDER", "BY", "DESC", "LIMIT", "||", "=", "!=", "<=",
    "\\", "\\u12", "#", "\n", "@en", "^^", "-1", "3.5", "<http://example.org/z>", "<z>",
]


def _mutate(text: str, rng: random.Random) -> str:
    for _ in range(rng.randint(1, 4)):
        position = rng.randint(0, len(text))
        choice = rng.random()
        if choice < 0.3:
            text = text[:position] + text[position + rng.randint(1, 6) :]
        elif choice < 0.7:
            text = text[:position] + rng.choice(FUZZ_TOKENS) + text[position:]
        elif choice < 0.85:
            tokens = text.split(" ")
            rng.shuffle(tokens)
            text = " ".join(tokens)
        else:
            text = text[:position]
    return text


@pytest.mark.serial
def test_parser_is_total_on_fuzzed_input():
    rng = random.Random(2024)
    outcomes = {"parsed": 0, "diagnosed": 0}
    for _ in range(10_000):
        text = _mutate(rng.choice(VALID_QUERIES), rng)
        try:
            parse_sparql(text)
            outcomes["parsed"] += 1
        except SparqlError:
            outcomes["diagnosed"] += 1
    assert outcomes["parsed"] + outcomes["diagnosed"] == 10_000
    assert outcomes["diagnosed"] > 0
