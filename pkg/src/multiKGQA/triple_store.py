import hashlib
import logging
from collections import defaultdict
from typing import Dict, FrozenSet, Iterable, List, Optional, Set

from multiKGQA.rdf import Term, Triple, parse_file

logger = logging.getLogger(__name__)

POSITIONS = ("subject", "predicate", "object")


class TripleStore:
    """Deduplicated, indexed set of triples for one graph; read-only after build."""

    def __init__(self, graph_id: str, triples: Iterable[Triple]):
        self.graph_id = graph_id
        self._triples = tuple(dict.fromkeys(triples))
        self._indexes: Dict[str, Dict[Term, Set[int]]] = {
            position: defaultdict(set) for position in POSITIONS
        }
        for triple_id, triple in enumerate(self._triples):
            self._indexes["subject"][triple.subject].add(triple_id)
            self._indexes["predicate"][triple.predicate].add(triple_id)
            self._indexes["object"][triple.object].add(triple_id)
        self._indexes = {
            position: {term: frozenset(ids) for term, ids in index.items()}
            for position, index in self._indexes.items()
        }

    @property
    def size(self) -> int:
        return len(self._triples)

    def __len__(self) -> int:
        return len(self._triples)

    @property
    def triples(self) -> tuple:
        return self._triples

    def lookup(self, position: str, term: Term) -> FrozenSet[int]:
        return self._indexes[position].get(term, frozenset())

    def by_subject(self, term: Term) -> List[Triple]:
        return [self._triples[i] for i in sorted(self.lookup("subject", term))]

    def by_predicate(self, term: Term) -> List[Triple]:
        return [self._triples[i] for i in sorted(self.lookup("predicate", term))]

    def by_object(self, term: Term) -> List[Triple]:
        return [self._triples[i] for i in sorted(self.lookup("object", term))]

    def candidate_ids(
        self,
        subject: Optional[Term] = None,
        predicate: Optional[Term] = None,
        obj: Optional[Term] = None,
    ) -> Optional[FrozenSet[int]]:
        """Smallest index posting list for the bound positions; None if nothing is bound."""
        postings = [
            self.lookup(position, term)
            for position, term in zip(POSITIONS, (subject, predicate, obj))
            if term is not None
        ]
        if not postings:
            return None
        return min(postings, key=len)

    def estimate(self, subject=None, predicate=None, obj=None) -> int:
        ids = self.candidate_ids(subject, predicate, obj)
        return self.size if ids is None else len(ids)

    def match(self, subject=None, predicate=None, obj=None) -> List[Triple]:
        ids = self.candidate_ids(subject, predicate, obj)
        candidates = (
            self._triples if ids is None else (self._triples[i] for i in sorted(ids))
        )
        return [
            triple
            for triple in candidates
            if (subject is None or triple.subject == subject)
            and (predicate is None or triple.predicate == predicate)
            and (obj is None or triple.object == obj)
        ]

    def contains_term(self, term: Term) -> bool:
        return any(term in index for index in self._indexes.values())

    def terms(self) -> Set[Term]:
        found = set()
        for index in self._indexes.values():
            found.update(index)
        return found

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for line in sorted(triple.n3() for triple in self._triples):
            digest.update(line.encode("utf-8"))
        return digest.hexdigest()

    def __repr__(self) -> str:
        return f"TripleStore({self.graph_id!r}, size={self.size})"


def build_store(graph_id: str, triples: Iterable[Triple]) -> TripleStore:
    store = TripleStore(graph_id, triples)
    logger.info("built store %s with %d triples", graph_id, store.size)
    return store


def load_store(graph_id: str, path: str) -> TripleStore:
    return build_store(graph_id, parse_file(path))
