"""SPARQL Protocol client: GET with a urlencoded ``query``, POST as fallback,
``application/sparql-results+json`` responses decoded onto local terms."""
import logging
import threading
import time
from typing import Dict, Optional

import requests

from multiKGQA.errors import NetworkError, ProtocolError
from multiKGQA.execution import AnswerSet
from multiKGQA.rdf import IRI, BlankNode, Literal, Term
from multiKGQA.sparql_ast import ASK, GraphPattern, SparqlQuery, TriplePattern, Variable, serialize_sparql

logger = logging.getLogger(__name__)

SPARQL_RESULTS_JSON = "application/sparql-results+json"
MAX_GET_QUERY_LENGTH = 2000

_endpoint_slots: Dict[str, threading.BoundedSemaphore] = {}
_endpoint_slots_lock = threading.Lock()


def _slots_for(endpoint: str, limit: int) -> threading.BoundedSemaphore:
    with _endpoint_slots_lock:
        if endpoint not in _endpoint_slots:
            _endpoint_slots[endpoint] = threading.BoundedSemaphore(limit)
        return _endpoint_slots[endpoint]


def parse_value(obj: dict) -> Term:
    kind = obj.get("type")
    value = obj.get("value", "")
    if kind == "uri":
        return IRI(value)
    if kind == "bnode":
        return BlankNode(value)
    if kind in ("literal", "typed-literal"):
        return Literal(value, datatype=obj.get("datatype"), language=obj.get("xml:lang"))
    logger.warning("unknown term type %r in results, reading it as a plain literal", kind)
    return Literal(str(value))


def parse_results(query: SparqlQuery, graph_id: str, payload: dict, elapsed: float) -> AnswerSet:
    if "boolean" in payload:
        return AnswerSet(query, graph_id, [], bool(payload["boolean"]), elapsed)
    variables = payload["head"]["vars"]
    rows = []
    for binding in payload["results"]["bindings"]:
        rows.append({name: parse_value(binding[name]) for name in variables if name in binding})
    truncated = query.limit is not None and len(rows) >= query.limit
    return AnswerSet(query, graph_id, list(variables), rows, elapsed, truncated)


def evaluate_remote(
    query: SparqlQuery,
    endpoint: str,
    timeout: float = 30.0,
    graph_id: Optional[str] = None,
    session: Optional[requests.Session] = None,
    max_concurrent: int = 4,
) -> AnswerSet:
    text = serialize_sparql(query)
    session = session or requests.Session()
    headers = {"Accept": SPARQL_RESULTS_JSON}
    started = time.perf_counter()
    with _slots_for(endpoint, max_concurrent):
        try:
            if len(text) <= MAX_GET_QUERY_LENGTH:
                response = session.get(endpoint, params={"query": text}, headers=headers, timeout=timeout)
                if response.status_code in (405, 414):
                    response = session.post(endpoint, data={"query": text}, headers=headers, timeout=timeout)
            else:
                response = session.post(endpoint, data={"query": text}, headers=headers, timeout=timeout)
        except (requests.Timeout, requests.ConnectionError) as e:
            raise NetworkError(endpoint, f"request failed: {e}") from e
        except requests.RequestException as e:
            raise NetworkError(endpoint, str(e)) from e
    elapsed = time.perf_counter() - started

    if response.status_code != 200:
        raise ProtocolError(endpoint, f"HTTP {response.status_code}", status=response.status_code)
    try:
        payload = response.json()
        answer = parse_results(query, graph_id or endpoint, payload, elapsed)
    except (ValueError, KeyError, TypeError) as e:
        raise ProtocolError(endpoint, f"undecodable results: {e}", status=response.status_code) from e
    logger.debug("%s answered in %.3fs", endpoint, elapsed)
    return answer


class RemoteExecutor:
    kind = "endpoint"

    def __init__(self, graph_id: str, endpoint: str, timeout: float = 30.0, max_concurrent: int = 4):
        self.graph_id = graph_id
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_concurrent = max_concurrent
        self._session = requests.Session()

    def execute(self, query: SparqlQuery) -> AnswerSet:
        return evaluate_remote(
            query,
            self.endpoint,
            self.timeout,
            graph_id=self.graph_id,
            session=self._session,
            max_concurrent=self.max_concurrent,
        )

    def contains_term(self, term: Term) -> bool:
        s, p, o = Variable("s"), Variable("p"), Variable("o")
        lookups = [TriplePattern(term, p, o), TriplePattern(s, p, term)]
        if isinstance(term, IRI):
            lookups.append(TriplePattern(s, term, o))
        for pattern in lookups:
            if isinstance(pattern.subject, Literal):
                continue
            ask = SparqlQuery(form=ASK, where=GraphPattern((pattern,)))
            if self.execute(ask).rows:
                return True
        return False
