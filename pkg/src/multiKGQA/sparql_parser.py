import logging

from parsimonious.exceptions import IncompleteParseError, ParseError, VisitationError
from parsimonious.grammar import Grammar
from parsimonious.nodes import NodeVisitor

from multiKGQA.errors import SparqlError, SparqlSyntaxError, UndefinedPrefix
from multiKGQA.rdf import IRI, RDF_TYPE, XSD_DECIMAL, XSD_INTEGER, Literal, unescape_string
from multiKGQA.sparql_ast import (
    ASK,
    LANG_EQ,
    REGEX,
    SELECT,
    CountAggregate,
    Filter,
    FilterExpr,
    GraphPattern,
    OrderKey,
    SparqlQuery,
    TriplePattern,
    Variable,
    validate_query,
)

logger = logging.getLogger(__name__)

SPARQL_GRAMMAR = Grammar(
    r"""
    query            = ws prologue query_body ws
    prologue         = prefix_decl*
    prefix_decl      = kw_prefix ws pname_ns ws iriref ws
    query_body       = select_query / ask_query

    select_query     = kw_select ws distinct projection ws where_kw group solution_mods
    ask_query        = kw_ask ws where_kw group
    distinct         = (kw_distinct ws)?
    where_kw         = (kw_where ws)?
    projection       = star / projection_items
    projection_items = projection_item (ws projection_item)*
    projection_item  = var / count_item
    count_item       = "(" ws kw_count ws "(" ws distinct count_target ws ")" ws kw_as ws var ws ")"
    count_target     = star / var
    star             = "*"

    group            = "{" ws group_items? ws "}"
    group_items      = group_item (ws group_item)*
    group_item       = optional_block / filter / pattern_dot
    pattern_dot      = triple_pattern (ws ".")?
    optional_block   = kw_optional ws "{" ws optional_items? ws "}" (ws ".")?
    optional_items   = pattern_dot (ws pattern_dot)*
    triple_pattern   = term ws verb ws term
    verb             = var / iri / kw_a
    term             = var / iri / literal

    filter           = kw_filter ws "(" ws disjunction ws ")" (ws ".")?
    disjunction      = condition (ws "||" ws condition)*
    condition        = regex_cond / lang_cond / compare_cond
    regex_cond       = kw_regex ws "(" ws var ws "," ws string regex_flags ws ")"
    regex_flags      = (ws "," ws string)?
    lang_cond        = kw_lang ws "(" ws var ws ")" ws "=" ws string
    compare_cond     = var ws comparator ws constant
    comparator       = "<=" / ">=" / "!=" / "=" / "<" / ">"
    constant         = iri / literal

    solution_mods    = group_by? order_by? limit?
    group_by         = ws kw_group ws kw_by ws var (ws var)*
    order_by         = ws kw_order ws kw_by ws order_key (ws order_key)*
    order_key        = directed_key / var
    directed_key     = (kw_asc / kw_desc) ws "(" ws var ws ")"
    limit            = ws kw_limit ws integer

    iri              = iriref / pname
    literal          = typed_string / number
    typed_string     = string suffix?
    suffix           = lang_tag / datatype
    datatype         = "^^" iri
    lang_tag         = ~r"@[A-Za-z]+(-[A-Za-z0-9]+)*"
    string           = ~r'"(?:[^"\\\r\n]|\\.)*"'
    number           = ~r"[+-]?[0-9]+(\.[0-9]+)?"
    integer          = ~r"[0-9]+"
    iriref           = ~r"<[^<>\"{}|^`\\\x00-\x20]*>"
    pname            = ~r"([A-Za-z][\w\-]*)?:[\w\-]*"
    pname_ns         = ~r"([A-Za-z][\w\-]*)?:"
    var              = ~r"[?$][A-Za-z_][A-Za-z0-9_]*"

    kw_prefix        = ~r"PREFIX\b"i
    kw_select        = ~r"SELECT\b"i
    kw_ask           = ~r"ASK\b"i
    kw_distinct      = ~r"DISTINCT\b"i
    kw_where         = ~r"WHERE\b"i
    kw_count         = ~r"COUNT\b"i
    kw_as            = ~r"AS\b"i
    kw_optional      = ~r"OPTIONAL\b"i
    kw_filter        = ~r"FILTER\b"i
    kw_regex         = ~r"REGEX\b"i
    kw_lang          = ~r"LANG\b"i
    kw_group         = ~r"GROUP\b"i
    kw_order         = ~r"ORDER\b"i
    kw_by            = ~r"BY\b"i
    kw_asc           = ~r"ASC\b"i
    kw_desc          = ~r"DESC\b"i
    kw_limit         = ~r"LIMIT\b"i
    kw_a             = ~r"a(?![\w:\-])"
    ws               = ~r"(?:\s|#[^\n]*)*"
    """
)

_READABLE = {
    "ws": "whitespace",
    "kw_a": "'a'",
    "iriref": "IRI",
    "pname": "prefixed name",
    "var": "variable",
    "group": "'{'",
}


class _QueryVisitor(NodeVisitor):
    unwrapped_exceptions = (SparqlError,)

    def __init__(self, text: str):
        self._text = text
        self._prefixes = {}

    def generic_visit(self, node, visited_children):
        return visited_children

    def _first(self, node, children):
        return children[0]

    visit_query_body = visit_projection_item = visit_group_item = _first
    visit_verb = visit_term = visit_constant = visit_condition = _first
    visit_iri = visit_literal = visit_suffix = visit_count_target = _first
    visit_order_key = visit_projection = _first

    def visit_query(self, node, children):
        return children[2]

    def visit_prefix_decl(self, node, children):
        prefix, namespace = children[2], children[4].value
        if prefix in self._prefixes:
            raise SparqlSyntaxError(node.start, ["new prefix name"], f"duplicate prefix '{prefix}:'")
        self._prefixes[prefix] = namespace

    def visit_pname_ns(self, node, _):
        return node.text[:-1]

    def visit_iriref(self, node, _):
        return IRI(node.text[1:-1]) if ":" in node.text else self._bad_iri(node)

    def _bad_iri(self, node):
        raise SparqlSyntaxError(node.start, ["absolute IRI"], f"relative IRI {node.text}")

    def visit_pname(self, node, _):
        prefix, local = node.text.split(":", 1)
        if prefix not in self._prefixes:
            raise UndefinedPrefix(prefix)
        return IRI(self._prefixes[prefix] + local)

    def visit_var(self, node, _):
        return Variable(node.text[1:])

    def visit_kw_a(self, node, _):
        return IRI(RDF_TYPE)

    def visit_star(self, node, _):
        return None

    def visit_string(self, node, _):
        try:
            return unescape_string(node.text[1:-1])
        except ValueError as e:
            raise SparqlSyntaxError(node.start, ["string escape"], str(e))

    def visit_lang_tag(self, node, _):
        return ("language", node.text[1:])

    def visit_datatype(self, node, children):
        return ("datatype", children[1].value)

    def visit_typed_string(self, node, children):
        lexical, suffix = children
        if not suffix:
            return Literal(lexical)
        kind, value = suffix[0]
        return Literal(lexical, language=value) if kind == "language" else Literal(lexical, datatype=value)

    def visit_number(self, node, _):
        return Literal(node.text, datatype=XSD_DECIMAL if "." in node.text else XSD_INTEGER)

    def visit_integer(self, node, _):
        return int(node.text)

    def visit_comparator(self, node, _):
        return node.text

    def visit_distinct(self, node, children):
        return bool(children)

    def visit_projection_items(self, node, children):
        first, rest = children
        return (first,) + tuple(item[1] for item in rest)

    def visit_count_item(self, node, children):
        distinct, target, alias = children[6], children[7], children[13]
        return CountAggregate(alias=alias, variable=target, distinct=distinct)

    def visit_triple_pattern(self, node, children):
        subject, _, predicate, _, obj = children
        if isinstance(subject, Literal):
            raise SparqlSyntaxError(node.start, ["variable", "IRI"], "a literal cannot be a subject")
        return TriplePattern(subject, predicate, obj)

    def visit_pattern_dot(self, node, children):
        return ("pattern", children[0])

    def visit_optional_items(self, node, children):
        first, rest = children
        return [first[1]] + [item[1][1] for item in rest]

    def visit_optional_block(self, node, children):
        items = children[4]
        return ("optional", tuple(items[0]) if items else ())

    def visit_filter(self, node, children):
        return ("filter", children[4])

    def visit_disjunction(self, node, children):
        first, rest = children
        return Filter((first,) + tuple(item[3] for item in rest))

    def visit_regex_cond(self, node, children):
        variable, pattern, flags = children[4], children[8], children[9]
        flag_text = flags[0][3] if flags else ""
        try:
            return FilterExpr(REGEX, variable, pattern, flag_text)
        except Exception as e:
            raise SparqlSyntaxError(node.start, ["valid regular expression"], str(e))

    def visit_lang_cond(self, node, children):
        return FilterExpr(LANG_EQ, children[4], children[10])

    def visit_compare_cond(self, node, children):
        variable, _, operator, _, constant = children
        return FilterExpr(operator, variable, constant)

    def visit_group_items(self, node, children):
        first, rest = children
        return [first] + [item[1] for item in rest]

    def visit_group(self, node, children):
        items = children[2]
        return items[0] if items else []

    def visit_group_by(self, node, children):
        first, rest = children[5], children[6]
        return ("group_by", (first,) + tuple(item[1] for item in rest))

    def visit_directed_key(self, node, children):
        (keyword,), variable = children[0], children[4]
        return OrderKey(variable, descending=keyword.text.upper() == "DESC")

    def visit_kw_asc(self, node, _):
        return node

    visit_kw_desc = visit_kw_asc

    def visit_order_by(self, node, children):
        first, rest = children[5], children[6]
        keys = [first] + [item[1] for item in rest]
        return (
            "order_by",
            tuple(key if isinstance(key, OrderKey) else OrderKey(key) for key in keys),
        )

    def visit_limit(self, node, children):
        return ("limit", children[3])

    def visit_solution_mods(self, node, children):
        modifiers = {}
        for optional in children:
            for name, value in optional:
                modifiers[name] = value
        return modifiers

    def _pattern(self, items):
        required, optional, filters = [], [], []
        for kind, value in items:
            if kind == "pattern":
                required.append(value)
            elif kind == "optional":
                optional.append(value)
            else:
                filters.append(value)
        return GraphPattern(tuple(required), tuple(optional)), tuple(filters)

    def visit_select_query(self, node, children):
        distinct, projection, items, modifiers = children[2], children[3], children[6], children[7]
        where, filters = self._pattern(items)
        return SparqlQuery(
            form=SELECT,
            where=where,
            projection=projection,
            prefixes=self._prefixes,
            filters=filters,
            distinct=distinct,
            group_by=modifiers.get("group_by", ()),
            order_by=modifiers.get("order_by", ()),
            limit=modifiers.get("limit"),
        )

    def visit_ask_query(self, node, children):
        where, filters = self._pattern(children[3])
        return SparqlQuery(form=ASK, where=where, prefixes=self._prefixes, filters=filters)


def parse_sparql(text: str) -> SparqlQuery:
    """Parses and validates a query; every failure surfaces as a SparqlError subclass."""
    try:
        tree = SPARQL_GRAMMAR.parse(text)
    except IncompleteParseError as e:
        raise SparqlSyntaxError(e.pos, ["end of query"]) from None
    except ParseError as e:
        name = getattr(e.expr, "name", "") or "query"
        raise SparqlSyntaxError(e.pos, [_READABLE.get(name, name)]) from None
    except RecursionError:
        raise SparqlSyntaxError(0, ["shallower query"], "query nesting too deep") from None
    try:
        query = _QueryVisitor(text).visit(tree)
    except VisitationError as e:
        raise SparqlSyntaxError(0, ["well-formed query"], str(e).splitlines()[0]) from None
    return validate_query(query)


def is_valid_sparql(text: str) -> bool:
    try:
        parse_sparql(text)
    except SparqlError:
        return False
    return True
