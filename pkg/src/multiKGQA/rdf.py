"""RDF terms and triples, plus readers for N-Triples and a Turtle subset.

The supported Turtle subset covers ``@prefix``/``PREFIX`` directives,
prefixed names, the ``a`` keyword, ``;`` and ``,`` abbreviations, literals
with ``^^`` datatypes or ``@`` language tags, and bare integer, decimal
and boolean literals. Blank nodes are renamed ``_:b<n>`` per document in
order of first occurrence.
"""
import logging
import re
from typing import Iterable, List, Optional, TextIO, Union

from attr import dataclass
from parsimonious.exceptions import IncompleteParseError, ParseError
from parsimonious.grammar import Grammar
from parsimonious.nodes import NodeVisitor
from rdflib.namespace import OWL, RDF, RDFS, XSD

from multiKGQA.errors import RdfSyntaxError, UndefinedPrefix

logger = logging.getLogger(__name__)

RDF_TYPE = str(RDF.type)
RDFS_LABEL = str(RDFS.label)
RDFS_SUBCLASS_OF = str(RDFS.subClassOf)
RDFS_DOMAIN = str(RDFS.domain)
RDFS_RANGE = str(RDFS.range)
OWL_SAME_AS = str(OWL.sameAs)
XSD_STRING = str(XSD.string)
XSD_INTEGER = str(XSD.integer)
XSD_DECIMAL = str(XSD.decimal)
XSD_DOUBLE = str(XSD.double)
XSD_BOOLEAN = str(XSD.boolean)

NUMERIC_DATATYPES = frozenset(
    str(dt)
    for dt in (
        XSD.integer,
        XSD.decimal,
        XSD.double,
        XSD.float,
        XSD.int,
        XSD.long,
        XSD.short,
        XSD.nonNegativeInteger,
        XSD.positiveInteger,
    )
)

_ABSOLUTE_IRI = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")


@dataclass(frozen=True)
class IRI:
    value: str

    def __attrs_post_init__(self):
        if not _ABSOLUTE_IRI.match(self.value):
            raise ValueError(f"IRI is not absolute: {self.value!r}")

    def n3(self) -> str:
        return f"<{self.value}>"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: Optional[str] = None
    language: Optional[str] = None

    def __attrs_post_init__(self):
        if self.datatype is not None and self.language is not None:
            raise ValueError("a literal carries a datatype or a language tag, not both")

    @property
    def is_numeric(self) -> bool:
        return self.datatype in NUMERIC_DATATYPES

    def numeric_value(self) -> Optional[float]:
        if not self.is_numeric:
            return None
        try:
            return float(self.lexical)
        except ValueError:
            return None

    def n3(self) -> str:
        text = f'"{escape_string(self.lexical)}"'
        if self.language is not None:
            return f"{text}@{self.language}"
        if self.datatype is not None:
            return f"{text}^^<{self.datatype}>"
        return text

    def __str__(self) -> str:
        return self.lexical


@dataclass(frozen=True)
class BlankNode:
    label: str

    def n3(self) -> str:
        return f"_:{self.label}"

    def __str__(self) -> str:
        return self.n3()


Term = Union[IRI, Literal, BlankNode]


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: IRI
    object: Term

    def __attrs_post_init__(self):
        if not isinstance(self.predicate, IRI):
            raise ValueError(f"predicate must be an IRI, got {self.predicate!r}")
        if isinstance(self.subject, Literal):
            raise ValueError("subject cannot be a literal")

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"t": "\t", "n": "\n", "r": "\r", "b": "\b", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_ESCAPE_SEQUENCE = re.compile(r"\\(u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|.)")


def escape_string(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_string(text: str) -> str:
    def replace(match):
        code = match.group(1)
        if code[0] in "uU" and len(code) > 1:
            return chr(int(code[1:], 16))
        if code not in _UNESCAPES:
            raise ValueError(f"unknown escape sequence \\{code}")
        return _UNESCAPES[code]

    return _ESCAPE_SEQUENCE.sub(replace, text)


_TERM_RULES = r"""
    iriref     = ~r"<[^<>\"{}|^`\\\x00-\x20]*>"
    blank_node = ~r"_:[A-Za-z0-9_]([A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?"
    string     = ~r'"(?:[^"\\\r\n]|\\.)*"'
    suffix     = lang_tag / datatype
    lang_tag   = ~r"@[A-Za-z]+(-[A-Za-z0-9]+)*"
"""

NTRIPLES_GRAMMAR = Grammar(
    r"""
    line         = ws statement? ws comment?
    statement    = subject ws iriref ws object ws "."
    subject      = iriref / blank_node
    object       = iriref / blank_node / literal
    literal      = typed_string
    typed_string = string suffix?
    datatype     = "^^" iriref
    ws           = ~r"[ \t]*"
    comment      = ~r"#.*"
    """
    + _TERM_RULES
)

TURTLE_GRAMMAR = Grammar(
    r"""
    document          = ws (statement ws)*
    statement         = directive / triples
    directive         = prefix_at / prefix_sparql
    prefix_at         = "@prefix" ws pname_ns ws iriref ws "."
    prefix_sparql     = ~r"PREFIX"i ws pname_ns ws iriref
    triples           = subject ws predicate_objects ws "."
    predicate_objects = verb_objects (ws ";" (ws verb_objects)?)*
    verb_objects      = verb ws objects
    objects           = object (ws "," ws object)*
    subject           = iri / blank_node
    verb              = iri / keyword_a
    object            = iri / blank_node / literal
    iri               = iriref / pname
    literal           = typed_string / number / boolean
    typed_string      = string suffix?
    datatype          = "^^" iri
    number            = ~r"[+-]?[0-9]+(\.[0-9]+)?"
    boolean           = ~r"(true|false)(?![\w:])"
    keyword_a         = ~r"a(?![\w:\-])"
    pname             = ~r"([A-Za-z][\w\-]*)?:[\w\-]*"
    pname_ns          = ~r"([A-Za-z][\w\-]*)?:"
    ws                = ~r"(?:\s|#[^\n]*)*"
    """
    + _TERM_RULES
)


class _RdfVisitor(NodeVisitor):
    def __init__(self, text: str, line_offset: int = 0, blank_nodes: Optional[dict] = None):
        self._text = text
        self._line_offset = line_offset
        self._prefixes = {}
        self._blank_nodes = {} if blank_nodes is None else blank_nodes
        self.triples: List[Triple] = []

    def _line(self, node) -> int:
        return self._line_offset + self._text.count("\n", 0, node.start) + 1

    def visit(self, node):
        method = getattr(self, "visit_" + node.expr_name, self.generic_visit)
        children = [self.visit(child) for child in node]
        try:
            return method(node, children)
        except ValueError as e:
            # term constructors reject values the grammar lets through
            raise RdfSyntaxError(str(e), self._line(node)) from None

    def generic_visit(self, node, visited_children):
        return visited_children

    def visit_iriref(self, node, _):
        value = node.text[1:-1]
        if not _ABSOLUTE_IRI.match(value):
            raise RdfSyntaxError(f"malformed IRI <{value}>", self._line(node))
        return IRI(value)

    def visit_pname(self, node, _):
        prefix, local = node.text.split(":", 1)
        if prefix not in self._prefixes:
            raise UndefinedPrefix(prefix, self._line(node))
        return IRI(self._prefixes[prefix] + local)

    def visit_pname_ns(self, node, _):
        return node.text[:-1]

    def visit_blank_node(self, node, _):
        label = node.text[2:]
        if label not in self._blank_nodes:
            self._blank_nodes[label] = BlankNode(f"b{len(self._blank_nodes)}")
        return self._blank_nodes[label]

    def visit_string(self, node, _):
        try:
            return unescape_string(node.text[1:-1])
        except ValueError as e:
            raise RdfSyntaxError(str(e), self._line(node))

    def visit_lang_tag(self, node, _):
        return ("language", node.text[1:])

    def visit_datatype(self, node, children):
        return ("datatype", children[1].value)

    def visit_typed_string(self, node, children):
        lexical, suffix = children
        if not suffix:
            return Literal(lexical)
        kind, value = suffix[0]
        if kind == "language":
            return Literal(lexical, language=value)
        return Literal(lexical, datatype=value)

    def visit_number(self, node, _):
        datatype = XSD_DECIMAL if "." in node.text else XSD_INTEGER
        return Literal(node.text, datatype=datatype)

    def visit_boolean(self, node, _):
        return Literal(node.text, datatype=XSD_BOOLEAN)

    def visit_keyword_a(self, node, _):
        return IRI(RDF_TYPE)

    def _first(self, node, children):
        return children[0]

    visit_subject = visit_object = visit_verb = visit_iri = _first
    visit_literal = visit_suffix = visit_statement = _first


class _NTriplesVisitor(_RdfVisitor):
    def visit_statement(self, node, children):
        subject, _, predicate, _, obj, _, _ = children
        self.triples.append(Triple(subject, predicate, obj))


class _TurtleVisitor(_RdfVisitor):
    def visit_prefix_at(self, node, children):
        self._prefixes[children[2]] = children[4].value

    def visit_prefix_sparql(self, node, children):
        self._prefixes[children[2]] = children[4].value

    def visit_objects(self, node, children):
        first, rest = children
        return [first] + [item[3] for item in rest]

    def visit_verb_objects(self, node, children):
        verb, _, objects = children
        return verb, objects

    def visit_predicate_objects(self, node, children):
        first, rest = children
        pairs = [first]
        for _, _, tail in rest:
            for _, verb_objects in tail:
                pairs.append(verb_objects)
        return pairs

    def visit_triples(self, node, children):
        subject, _, pairs, _, _ = children
        if isinstance(subject, Literal):
            raise RdfSyntaxError("a literal cannot be a subject", self._line(node))
        for verb, objects in pairs:
            for obj in objects:
                self.triples.append(Triple(subject, verb, obj))


def _read(source: Union[str, TextIO]) -> str:
    return source if isinstance(source, str) else source.read()


def parse_ntriples(source: Union[str, TextIO]) -> List[Triple]:
    text = _read(source)
    blank_nodes = {}
    triples = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        visitor = _NTriplesVisitor(line, line_offset=number - 1, blank_nodes=blank_nodes)
        try:
            visitor.visit(NTRIPLES_GRAMMAR.parse(line))
        except (ParseError, IncompleteParseError) as e:
            raise RdfSyntaxError(_describe(line, e), number, e.column()) from None
        triples.extend(visitor.triples)
    logger.debug("parsed %d N-Triples statements", len(triples))
    return triples


def parse_turtle(source: Union[str, TextIO]) -> List[Triple]:
    text = _read(source)
    visitor = _TurtleVisitor(text)
    try:
        visitor.visit(TURTLE_GRAMMAR.parse(text))
    except (ParseError, IncompleteParseError) as e:
        raise RdfSyntaxError(_describe(text, e), e.line(), e.column()) from None
    logger.debug("parsed %d Turtle triples", len(visitor.triples))
    return visitor.triples


def _describe(text: str, error: ParseError) -> str:
    rest = text[error.pos :]
    if rest.count('"') % 2 == 1:
        return "unterminated literal"
    if rest.lstrip().startswith("<") and ">" not in rest:
        return "malformed IRI"
    rule = getattr(error.expr, "name", "") or "statement"
    if not rest.strip():
        return f"unexpected end of statement (missing {rule} or terminator)"
    return f"cannot parse {rule} near {rest[:20]!r}"


def serialize_ntriples(triples: Iterable[Triple]) -> str:
    return "".join(triple.n3() + "\n" for triple in triples)


def parse_file(path: str) -> List[Triple]:
    """Reads ``.nt`` or ``.ttl`` files, chosen by extension."""
    with open(path, encoding="utf-8") as f:
        if path.endswith(".ttl"):
            return parse_turtle(f)
        return parse_ntriples(f)
