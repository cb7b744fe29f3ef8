import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA import rdf
from multiKGQA.errors import RdfSyntaxError, UndefinedPrefix
from multiKGQA.fixtures import (
    EU_PILOT,
    GERMAN_IS,
    build_world,
    eu_pilot_triples,
    german_is_triples,
    serialize_turtle,
)
from multiKGQA.rdf import (
    IRI,
    RDF_TYPE,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_INTEGER,
    BlankNode,
    Literal,
    Triple,
    escape_string,
    parse_file,
    parse_ntriples,
    parse_turtle,
    serialize_ntriples,
    unescape_string,
)

EX = "http://example.org/"


def test_ntriples_terms():
    text = (
        f"<{EX}a> <{EX}name> \"Nordwerk\" .\n"
        f"<{EX}a> <{EX}label> \"Haus\"@de .\n"
        f"<{EX}a> <{EX}count> \"12\"^^<{XSD_INTEGER}> .\n"
        f"_:x <{EX}knows> <{EX}a> .\n"
        "# a comment line\n"
        "\n"
    )
    triples = parse_ntriples(text)
    assert len(triples) == 4
    assert triples[0].object == Literal("Nordwerk")
    assert triples[1].object == Literal("Haus", language="de")
    assert triples[2].object.is_numeric
    assert triples[2].object.numeric_value() == 12.0
    assert triples[3].subject == BlankNode("b0")


def test_blank_nodes_renamed_per_document():
    text = f"_:zz <{EX}p> _:aa .\n_:aa <{EX}p> _:zz .\n"
    triples = parse_ntriples(text)
    assert triples[0].subject == BlankNode("b0")
    assert triples[0].object == BlankNode("b1")
    assert triples[1].subject == BlankNode("b1")
    assert triples[1].object == BlankNode("b0")


@pytest.mark.parametrize(
    "text, line",
    [
        (f"<{EX}a> <{EX}p> <{EX}b>\n", 1),
        (f"<{EX}a> <{EX}p> <{EX}b> .\n<{EX}a> <{EX}p> \"open .\n", 2),
        (f"<{EX}a> <{EX}p> <{EX}b> .\n\n<{EX}a> <{EX}p> <relative> .\n", 3),
        (f"<{EX}a> <{EX}p> <{EX}b .\n", 1),
    ],
)
def test_ntriples_errors_carry_line(text, line):
    with pytest.raises(RdfSyntaxError) as info:
        parse_ntriples(text)
    assert info.value.line == line


def test_turtle_abbreviations():
    text = f"""
    @prefix ex: <{EX}> .
    PREFIX xs: <http://www.w3.org/2001/XMLSchema#>
    # comment
    ex:a a ex:Actor ;
        ex:name "Nordwerk", "Elbtal" ;
        ex:size 42 ;
        ex:ratio 0.5 ;
        ex:active true ;
        ex:code "7"^^xs:string .
    """
    triples = parse_turtle(text)
    assert Triple(IRI(EX + "a"), IRI(RDF_TYPE), IRI(EX + "Actor")) in triples
    assert len([t for t in triples if t.predicate == IRI(EX + "name")]) == 2
    objects = {t.predicate.value: t.object for t in triples}
    assert objects[EX + "size"] == Literal("42", datatype=XSD_INTEGER)
    assert objects[EX + "ratio"] == Literal("0.5", datatype=XSD_DECIMAL)
    assert objects[EX + "active"] == Literal("true", datatype=XSD_BOOLEAN)
    assert len(triples) == 7


def test_turtle_undefined_prefix():
    with pytest.raises(UndefinedPrefix):
        parse_turtle("nope:a nope:b nope:c .")
    with pytest.raises(UndefinedPrefix) as info:
        parse_turtle(f"@prefix ex: <{EX}> .\nex:a ex:b ex:c .\n\nnope:a ex:b ex:c .\n")
    assert info.value.line == 4


def test_turtle_rejected_value_reports_its_line(monkeypatch):
    def reject(self, node, _):
        raise ValueError(f"unsupported boolean {node.text}")

    monkeypatch.setattr(rdf._TurtleVisitor, "visit_boolean", reject)
    with pytest.raises(RdfSyntaxError) as info:
        parse_turtle(f"@prefix ex: <{EX}> .\nex:a ex:size 42 ;\n    ex:active true .\n")
    assert info.value.line == 3
    assert "unsupported boolean true" in str(info.value)


def test_turtle_syntax_error():
    with pytest.raises(RdfSyntaxError) as info:
        parse_turtle(f"@prefix ex: <{EX}> .\nex:a ex:b ex:c\n")
    assert info.value.line >= 1


@pytest.mark.parametrize("graph", [GERMAN_IS, EU_PILOT])
def test_turtle_writer_round_trip(graph):
    world = build_world(seed=0)
    triples = german_is_triples(world) if graph == GERMAN_IS else eu_pilot_triples(world)
    assert set(parse_turtle(serialize_turtle(triples))) == set(triples)


def test_ntriples_round_trip_with_escapes():
    triples = [
        Triple(IRI(EX + "a"), IRI(EX + "note"), Literal('line one\nsays "hi"\t\\ok')),
        Triple(IRI(EX + "a"), IRI(EX + "label"), Literal("Fluss", language="de")),
    ]
    assert parse_ntriples(serialize_ntriples(triples)) == triples


def test_escape_helpers():
    assert unescape_string(escape_string('a"b\\c\n')) == 'a"b\\c\n'
    assert unescape_string("\\u00e9") == "é"
    with pytest.raises(ValueError):
        unescape_string("\\q")


def test_term_validation():
    with pytest.raises(ValueError):
        IRI("relative/path")
    with pytest.raises(ValueError):
        Literal("x", datatype=XSD_INTEGER, language="en")
    with pytest.raises(ValueError):
        Triple(Literal("s"), IRI(EX + "p"), IRI(EX + "o"))
    assert Literal("abc", datatype=XSD_INTEGER).numeric_value() is None


def test_parse_file_by_extension(tmp_path):
    nt = tmp_path / "graph.nt"
    nt.write_text(f"<{EX}a> <{EX}p> <{EX}b> .\n", encoding="utf-8")
    ttl = tmp_path / "graph.ttl"
    ttl.write_text(f"@prefix ex: <{EX}> .\nex:a ex:p ex:b .\n", encoding="utf-8")
    assert parse_file(str(nt)) == parse_file(str(ttl))
