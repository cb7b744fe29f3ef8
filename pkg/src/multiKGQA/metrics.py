from collections import Counter
from typing import Dict, List, Optional

from multiKGQA.errors import SparqlError
from multiKGQA.execution import AnswerSet
from multiKGQA.rdf import XSD_BOOLEAN, Literal, Term
from multiKGQA.sparql_ast import triple_patterns_of
from multiKGQA.sparql_parser import is_valid_sparql, parse_sparql
from multiKGQA.trace import PipelineTrace

Rows = List[Dict[str, Term]]


def _rows_of(predicted) -> Rows:
    if isinstance(predicted, AnswerSet) and predicted.is_boolean:
        return [{"answer": Literal("true" if predicted.rows else "false", datatype=XSD_BOOLEAN)}]
    return predicted.rows if hasattr(predicted, "rows") else predicted


def _row_key(row: Dict[str, Term]) -> tuple:
    # variable names are not compared, only the bound values
    return tuple(sorted(term.n3() for term in row.values()))


def score_ea(predicted, gold_rows: Rows) -> int:
    """1 iff the prediction exists and its rows equal the gold rows as multisets."""
    if predicted is None:
        return 0
    rows = _rows_of(predicted)
    return int(Counter(map(_row_key, rows)) == Counter(map(_row_key, gold_rows)))


def score_qsc(text: str) -> int:
    return int(is_valid_sparql(text))


def score_tf1(predicted: str, gold: str) -> float:
    """Micro F1 over WHERE-clause triple patterns, ignoring variable names and filters."""
    try:
        predicted_patterns = triple_patterns_of(parse_sparql(predicted))
        gold_patterns = triple_patterns_of(parse_sparql(gold))
    except SparqlError:
        return 0.0
    overlap = sum((predicted_patterns & gold_patterns).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(predicted_patterns.values())
    recall = overlap / sum(gold_patterns.values())
    return 2 * precision * recall / (precision + recall)


def synthesized_queries(trace: Optional[PipelineTrace]) -> List[str]:
    if trace is None:
        return []
    return [
        query
        for subgoal in sorted(trace.subgoals, key=lambda s: s.subgoal_id)
        for attempt in subgoal.attempts
        if attempt.synthesis is not None
        for query in attempt.synthesis["queries"]
    ]


def executed_query(trace: Optional[PipelineTrace]) -> Optional[str]:
    """The first query that ran to completion, in subgoal order."""
    if trace is None:
        return None
    for subgoal in sorted(trace.subgoals, key=lambda s: s.subgoal_id):
        for attempt in subgoal.attempts:
            if attempt.executions:
                return attempt.executions[0]["query"]
    return None
