"""Benchmark corpus: JSON Lines, one item per line."""
import json
import logging
from typing import Dict, List, Optional

from attr import Factory, dataclass

from multiKGQA.errors import CorpusError, SparqlError
from multiKGQA.rdf import XSD_BOOLEAN, Literal, Term
from multiKGQA.remote import parse_value
from multiKGQA.sparql_parser import parse_sparql

logger = logging.getLogger(__name__)

SINGLE_KG = "single-kg"
CROSS_KG = "cross-kg"


@dataclass
class BenchmarkItem:
    id: str
    question: str
    clarification: Optional[str] = None
    gold_query: Optional[str] = None
    # SPARQL results JSON
    gold_answer: Optional[dict] = None
    gold_graphs: List[str] = Factory(list)
    tags: List[str] = Factory(list)

    @property
    def setting(self) -> str:
        return CROSS_KG if CROSS_KG in self.tags else SINGLE_KG

    def gold_rows(self) -> Optional[List[Dict[str, Term]]]:
        """The gold answer as rows of terms; a boolean answer becomes one ``answer`` row."""
        if self.gold_answer is None:
            return None
        if "boolean" in self.gold_answer:
            value = "true" if self.gold_answer["boolean"] else "false"
            return [{"answer": Literal(value, datatype=XSD_BOOLEAN)}]
        return [
            {name: parse_value(value) for name, value in binding.items()}
            for binding in self.gold_answer["results"]["bindings"]
        ]

    def validate(self) -> "BenchmarkItem":
        if not self.id:
            raise CorpusError("item without an id")
        if not self.question.strip():
            raise CorpusError("empty question", self.id)
        if self.gold_query is None and self.gold_answer is None:
            raise CorpusError("needs a gold query or a gold answer", self.id)
        if self.gold_query is not None:
            try:
                parse_sparql(self.gold_query)
            except SparqlError as e:
                raise CorpusError(f"gold query does not parse: {e}", self.id) from e
        if self.gold_answer is not None:
            try:
                self.gold_rows()
            except (KeyError, TypeError, AttributeError, ValueError) as e:
                raise CorpusError(f"malformed gold answer: {e}", self.id) from e
        if self.setting == CROSS_KG and len(set(self.gold_graphs)) < 2:
            raise CorpusError("cross-kg items must list at least two graphs", self.id)
        return self

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "clarification": self.clarification,
            "gold_query": self.gold_query,
            "gold_answer": self.gold_answer,
            "gold_graphs": list(self.gold_graphs),
            "tags": list(self.tags),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BenchmarkItem":
        return cls(
            id=str(obj["id"]),
            question=obj["question"],
            clarification=obj.get("clarification"),
            gold_query=obj.get("gold_query"),
            gold_answer=obj.get("gold_answer"),
            gold_graphs=list(obj.get("gold_graphs", [])),
            tags=list(obj.get("tags", [])),
        )


def load_corpus(path: str) -> List[BenchmarkItem]:
    items, seen = [], set()
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise CorpusError(f"cannot read corpus {path}: {e}") from e
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            item = BenchmarkItem.from_json(json.loads(line))
        except (ValueError, KeyError, TypeError) as e:
            raise CorpusError(f"line {number} of {path} is not a corpus item: {e}") from e
        if item.id in seen:
            raise CorpusError("duplicate item id", item.id)
        seen.add(item.id)
        items.append(item.validate())
    if not items:
        raise CorpusError(f"corpus {path} has no items")
    logger.info("loaded %d corpus items from %s", len(items), path)
    return items
