"""Two-tier graph allocation for subgoals.

The weak tier ranks registry entries by cosine similarity between the subgoal
mentions and each entry's metadata document, keeps the top ``k`` and boosts
each survivor by its best source-document match. The strong tier grounds every
mention against the survivor's schema slice by label and scales the grounded
fraction by a domain compatibility factor.
"""
import logging
import re
from typing import Dict, List, Optional, Tuple

import attr
from attr import Factory, dataclass

from multiKGQA.errors import NoViableGraph
from multiKGQA.lexicon import Lexicon
from multiKGQA.rdf import IRI
from multiKGQA.registry import GraphRegistry, RegistryEntry
from multiKGQA.schema import STANDARD_PREFIXES, SchemaSlice, local_name
from multiKGQA.subgoals import Subgoal
from multiKGQA.text import label_score, words

logger = logging.getLogger(__name__)

HIERARCHICAL = "hierarchical"
TERM_OVERLAP = "term-overlap"

INCOMPATIBLE_FACTOR = 0.5

_SCHEMA_VOCABULARY = tuple(STANDARD_PREFIXES.values())


@dataclass(frozen=True)
class AllocationWeights:
    weak: float = 0.3
    strong: float = 0.5
    utility: float = 0.2
    k: int = 5

    def __attrs_post_init__(self):
        if self.k < 1:
            raise ValueError("the weak tier must keep at least one graph")
        if min(self.weak, self.strong, self.utility) < 0:
            raise ValueError("allocation weights must be non-negative")


@dataclass(frozen=True)
class CandidateScore:
    graph_id: str
    weak: float
    strong: float
    combined: float
    grounding: Dict[str, str] = Factory(dict)

    def to_json(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "weak": round(self.weak, 6),
            "strong": round(self.strong, 6),
            "combined": round(self.combined, 6),
        }


@dataclass(frozen=True)
class AllocationDecision:
    subgoal_id: int
    graph_id: str
    ranking: Tuple[CandidateScore, ...]
    grounding: Dict[str, str] = Factory(dict)
    method: str = HIERARCHICAL

    def for_graph(self, graph_id: str) -> "AllocationDecision":
        """The same decision re-pointed at a lower-ranked candidate, for fallback."""
        for candidate in self.ranking:
            if candidate.graph_id == graph_id:
                return attr.evolve(self, graph_id=graph_id, grounding=dict(candidate.grounding))
        raise KeyError(graph_id)

    @property
    def fallbacks(self) -> List[str]:
        return [c.graph_id for c in self.ranking if c.graph_id != self.graph_id and c.combined > 0]

    def to_json(self) -> dict:
        return {
            "subgoal_id": self.subgoal_id,
            "graph_id": self.graph_id,
            "method": self.method,
            "ranking": [candidate.to_json() for candidate in self.ranking],
            "grounding": dict(sorted(self.grounding.items())),
        }


def _ranked(scores: List[Tuple[str, float]]) -> List[Tuple[str, float]]:
    return sorted(scores, key=lambda item: (-item[1], item[0]))


# weak tier


def weak_retrieve(subgoal: Subgoal, registry: GraphRegistry, k: int = 5) -> List[Tuple[str, float]]:
    if k < 1:
        raise ValueError("k must be at least 1")
    embedder = registry.embedder()
    entries = registry.snapshot()
    query = embedder.embed_text(subgoal.mention_text())
    base = _ranked([(e.graph_id, embedder.similarity(query, e.embedding or {})) for e in entries])[:k]
    by_id = {entry.graph_id: entry for entry in entries}
    boosted = []
    for graph_id, score in base:
        source_scores = [embedder.similarity(query, v) for v in by_id[graph_id].source_embeddings or []]
        best = max(source_scores, default=0.0)
        boosted.append((graph_id, min(1.0, score + (1.0 - score) * best)))
    return _ranked(boosted)


# strong tier


def _names(slice: SchemaSlice, iri: str) -> List[str]:
    return sorted(slice.labels.get(iri, set())) + [" ".join(words(local_name(iri)))]


def _best_match(mention: str, slice: SchemaSlice, iris) -> Tuple[Optional[str], float]:
    best_iri, best_score = None, 0.0
    for iri in sorted(iris):
        score = max((label_score(mention, name) for name in _names(slice, iri)), default=0.0)
        if score > best_score:
            best_iri, best_score = iri, score
    return best_iri, best_score


def _class_candidates(slice: SchemaSlice) -> set:
    classes = set(slice.classes)
    for constraint in (slice.declared_domains, slice.declared_ranges):
        for values in constraint.values():
            classes.update(values)
    return {c for c in classes if not c.startswith(_SCHEMA_VOCABULARY)}


def _predicate_candidates(slice: SchemaSlice) -> set:
    return {p for p in slice.predicates if not p.startswith(_SCHEMA_VOCABULARY)}


def ground_mention(
    mention: str, kind: str, slice: SchemaSlice, cache: Optional[dict] = None, slice_hash: str = ""
) -> Tuple[Optional[str], float]:
    """Best slice IRI for a class or predicate mention, with its label score."""
    key = (slice_hash or slice.content_hash(), kind, mention.casefold())
    if cache is not None and key in cache:
        return cache[key]
    candidates = _class_candidates(slice) if kind == "class" else _predicate_candidates(slice)
    result = _best_match(mention, slice, candidates)
    if cache is not None:
        cache[key] = result
    return result


def _compatible(slice: SchemaSlice, classes: List[str], predicates: List[str]) -> bool:
    declared = [slice.declared_domains[p] for p in predicates if slice.declared_domains.get(p)]
    for cls in classes:
        for domain in declared:
            if not any(slice.is_subclass(cls, c) for c in domain):
                return False
    for i, left in enumerate(declared):
        for right in declared[i + 1 :]:
            if not any(slice.is_subclass(a, b) or slice.is_subclass(b, a) for a in left for b in right):
                return False
    return True


def align(
    subgoal: Subgoal,
    entry: RegistryEntry,
    lexicon: Optional[Lexicon] = None,
    cache: Optional[dict] = None,
) -> Tuple[float, Dict[str, str]]:
    slice = entry.schema
    slice_hash = entry.slice_hash
    scores, grounding = [], {}
    grounded_classes, grounded_predicates = [], []

    def record(mention, kind):
        iri, score = ground_mention(mention, kind, slice, cache, slice_hash)
        scores.append(score)
        if iri is not None:
            grounding[mention] = iri
            (grounded_classes if kind == "class" else grounded_predicates).append(iri)

    for mention in subgoal.class_mentions:
        record(mention, "class")
    for mention in subgoal.relation_mentions:
        record(mention, "predicate")
    for mention in subgoal.entity_mentions:
        scheme, _ = subgoal.entity_parts(mention)
        if scheme is not None:
            record(scheme, "predicate")
            if scheme in grounding:
                grounding[mention] = grounding[scheme]
            continue
        target = lexicon.default_target(mention) if lexicon is not None else None
        found = target is not None and entry.executor().contains_term(IRI(target))
        scores.append(1.0 if found else 0.0)

    if not scores:
        return 0.0, {}
    fraction = sum(scores) / len(scores)
    factor = 1.0 if _compatible(slice, grounded_classes, grounded_predicates) else INCOMPATIBLE_FACTOR
    return fraction * factor, grounding


def strong_align(
    subgoal: Subgoal,
    candidates: List[Tuple[str, float]],
    registry: GraphRegistry,
    lexicon: Optional[Lexicon] = None,
) -> List[Tuple[str, float, Dict[str, str]]]:
    aligned = []
    for graph_id, _ in candidates:
        score, grounding = align(subgoal, registry.get(graph_id), lexicon, registry.grounding_cache)
        aligned.append((graph_id, score, grounding))
    return sorted(aligned, key=lambda item: (-item[1], item[0]))


def allocate(
    subgoal: Subgoal,
    registry: GraphRegistry,
    lexicon: Optional[Lexicon] = None,
    weights: AllocationWeights = AllocationWeights(),
) -> AllocationDecision:
    """Chooses the graph with the highest combined score among the weak-tier survivors.

    Utility only counts for candidates with some retrieval evidence: a graph
    whose weak and strong scores are both zero scores zero overall.
    """
    if not len(registry):
        raise NoViableGraph(f"no graph is registered for subgoal {subgoal.id}")
    weak = weak_retrieve(subgoal, registry, weights.k)
    strong = {graph_id: (score, grounding) for graph_id, score, grounding in strong_align(subgoal, weak, registry, lexicon)}
    ranking = []
    for graph_id, weak_score in weak:
        strong_score, grounding = strong[graph_id]
        combined = 0.0
        if weak_score > 0 or strong_score > 0:
            utility = registry.get(graph_id).utility
            combined = weights.weak * weak_score + weights.strong * strong_score + weights.utility * utility
        ranking.append(CandidateScore(graph_id, weak_score, strong_score, combined, grounding))
    ranking.sort(key=lambda c: (-c.combined, c.graph_id))
    best = ranking[0]
    if best.combined <= 0:
        raise NoViableGraph(f"no graph matches subgoal {subgoal.id} ({subgoal.mention_text()!r})")
    logger.debug("subgoal %d allocated to %s (%.3f)", subgoal.id, best.graph_id, best.combined)
    return AllocationDecision(subgoal.id, best.graph_id, tuple(ranking), dict(best.grounding))


_RAW_WORD = re.compile(r"[a-z0-9]+")


def allocate_by_term_overlap(subgoal: Subgoal, registry: GraphRegistry) -> AllocationDecision:
    """Allocation without schema alignment: raw word overlap with the metadata document, no grounding."""
    if not len(registry):
        raise NoViableGraph(f"no graph is registered for subgoal {subgoal.id}")
    mention_words = set(_RAW_WORD.findall(subgoal.mention_text().lower()))
    ranking = []
    for entry in registry.snapshot():
        document_words = set(_RAW_WORD.findall(entry.document.lower()))
        overlap = len(mention_words & document_words) / len(mention_words) if mention_words else 0.0
        ranking.append(CandidateScore(entry.graph_id, overlap, 0.0, overlap))
    ranking.sort(key=lambda c: (-c.combined, c.graph_id))
    if ranking[0].combined <= 0:
        raise NoViableGraph(f"no graph shares a word with subgoal {subgoal.id}")
    return AllocationDecision(subgoal.id, ranking[0].graph_id, tuple(ranking), {}, TERM_OVERLAP)
