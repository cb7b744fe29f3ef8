"""Graph registry: stores or endpoints, their schema slices, metadata and utility scores.

Writers (register, remove, update_utility, refresh) hold the registry lock;
readers work on :meth:`GraphRegistry.snapshot`, a consistent copy of the entries.
While a question runs inside :meth:`GraphRegistry.question`, register, remove
and refresh wait for it to finish; utility updates go through.
"""
import json
import logging
import os
import threading
from contextlib import contextmanager
from typing import Dict, List, Optional, Tuple

import attr
from attr import Factory, dataclass

from multiKGQA.embedding import LexicalEmbedder, Vector
from multiKGQA.errors import DuplicateGraphId, RegistryError, UnknownGraph
from multiKGQA.execution import LocalExecutor
from multiKGQA.rdf import IRI, BlankNode, Literal, Triple
from multiKGQA.remote import RemoteExecutor
from multiKGQA.schema import SchemaSlice, extract_schema, schema_summary
from multiKGQA.sparql_ast import SELECT, GraphPattern, SparqlQuery, TriplePattern, Variable
from multiKGQA.triple_store import TripleStore, build_store, load_store

logger = logging.getLogger(__name__)

FILE = "file"
ENDPOINT = "endpoint"

INITIAL_UTILITY = 0.5
UTILITY_DECAY = 0.9
UTILITY_REWARDS = {"verified-pass": 1.0, "verified-fail": 0.0, "empty-result": 0.25}

ENDPOINT_SAMPLE = 50000


@dataclass
class RegistryEntry:
    graph_id: str
    kind: str
    location: str
    schema: SchemaSlice
    metadata: str = ""
    sources: List[Tuple[str, str]] = Factory(list)
    store: Optional[TripleStore] = None
    utility: float = INITIAL_UTILITY
    embedding: Optional[Vector] = None
    source_embeddings: Optional[List[Vector]] = None

    @property
    def document(self) -> str:
        """Metadata document: the schema summary followed by the free-text domain labels."""
        return schema_summary(self.schema) + self.metadata

    @property
    def slice_hash(self) -> str:
        return self.schema.content_hash()

    def executor(self, timeout: float = 30.0):
        if self.kind == FILE:
            return LocalExecutor(self.store)
        return RemoteExecutor(self.graph_id, self.location, timeout)

    def to_manifest(self, base_dir: str) -> dict:
        location = self.location
        if self.kind == FILE and base_dir:
            location = os.path.relpath(location, base_dir)
        return {
            "graph_id": self.graph_id,
            "kind": self.kind,
            "path" if self.kind == FILE else "url": location,
            "metadata": self.metadata,
            "sources": [os.path.relpath(path, base_dir) if base_dir else path for path, _ in self.sources],
            "utility": round(self.utility, 6),
        }


def fetch_endpoint_triples(url: str, timeout: float = 30.0, limit: int = ENDPOINT_SAMPLE) -> List[Triple]:
    s, p, o = Variable("s"), Variable("p"), Variable("o")
    query = SparqlQuery(form=SELECT, where=GraphPattern((TriplePattern(s, p, o),)), limit=limit)
    answer = RemoteExecutor(url, url, timeout).execute(query)
    triples = []
    for row in answer.rows:
        subject, predicate, obj = row.get("s"), row.get("p"), row.get("o")
        if isinstance(subject, (IRI, BlankNode)) and isinstance(predicate, IRI) and obj is not None:
            triples.append(Triple(subject, predicate, obj))
    if answer.truncated or len(triples) >= limit:
        logger.warning("schema of %s extracted from the first %d triples only", url, limit)
    return triples


def _read_source(path: str) -> Tuple[str, str]:
    with open(path, encoding="utf-8") as f:
        return os.path.abspath(path), f.read()


class GraphRegistry:
    def __init__(self, manifest_path: Optional[str] = None):
        self.manifest_path = manifest_path
        self._entries: Dict[str, RegistryEntry] = {}
        self._lock = threading.RLock()
        self._idle = threading.Condition(self._lock)
        self._questions = 0
        self._embedder: Optional[LexicalEmbedder] = None
        self.grounding_cache: Dict[tuple, tuple] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, graph_id: str) -> bool:
        return graph_id in self._entries

    @property
    def graph_ids(self) -> List[str]:
        return sorted(self._entries)

    def snapshot(self) -> List[RegistryEntry]:
        with self._lock:
            return [self._entries[graph_id] for graph_id in sorted(self._entries)]

    def get(self, graph_id: str) -> RegistryEntry:
        with self._lock:
            if graph_id not in self._entries:
                raise UnknownGraph(f"graph {graph_id!r} is not registered")
            return self._entries[graph_id]

    @contextmanager
    def question(self):
        with self._lock:
            self._questions += 1
        try:
            yield self
        finally:
            with self._lock:
                self._questions -= 1
                self._idle.notify_all()

    def _wait_idle(self):
        while self._questions:
            self._idle.wait()

    # writers

    def register(self, entry: RegistryEntry) -> RegistryEntry:
        with self._lock:
            self._wait_idle()
            if entry.graph_id in self._entries:
                raise DuplicateGraphId(f"graph {entry.graph_id!r} is already registered")
            self._entries[entry.graph_id] = entry
            self._mark_stale()
        logger.info("registered %s graph %s (%d predicates)", entry.kind, entry.graph_id, len(entry.schema.predicates))
        return entry

    def register_graph(
        self,
        graph_id: str,
        kind: str,
        location: str,
        metadata: str = "",
        sources: Optional[List[str]] = None,
        utility: float = INITIAL_UTILITY,
        prefixes: Optional[Dict[str, str]] = None,
    ) -> RegistryEntry:
        if graph_id in self._entries:
            raise DuplicateGraphId(f"graph {graph_id!r} is already registered")
        store = None
        if kind == FILE:
            try:
                store = load_store(graph_id, location)
            except OSError as e:
                raise RegistryError(f"cannot load {location}: {e}") from e
            schema = extract_schema(store, prefixes)
        elif kind == ENDPOINT:
            schema = extract_schema(build_store(graph_id, fetch_endpoint_triples(location)), prefixes)
        else:
            raise RegistryError(f"unknown graph kind {kind!r}")
        try:
            documents = [_read_source(path) for path in sources or []]
        except OSError as e:
            raise RegistryError(f"cannot read source document: {e}") from e
        entry = RegistryEntry(
            graph_id=graph_id,
            kind=kind,
            location=location,
            schema=schema,
            metadata=metadata,
            sources=documents,
            store=store,
            utility=min(1.0, max(0.0, utility)),
        )
        return self.register(entry)

    def remove_graph(self, graph_id: str):
        with self._lock:
            self._wait_idle()
            if graph_id not in self._entries:
                raise UnknownGraph(f"graph {graph_id!r} is not registered")
            del self._entries[graph_id]
            self._mark_stale()
        logger.info("removed graph %s", graph_id)

    def refresh(self, graph_id: str) -> bool:
        """Reloads a file graph; returns True when its schema slice changed."""
        with self._lock:
            self._wait_idle()
            entry = self.get(graph_id)
            if entry.kind != FILE:
                return False
            store = load_store(graph_id, entry.location)
            schema = extract_schema(store, entry.schema.namespaces)
            changed = schema.content_hash() != entry.slice_hash
            self._entries[graph_id] = attr.evolve(entry, store=store, schema=schema, embedding=None)
            if changed:
                self._mark_stale()
                logger.info("schema of %s changed, cached groundings dropped", graph_id)
            return changed

    def update_utility(self, graph_id: str, outcome: str) -> float:
        if outcome not in UTILITY_REWARDS:
            raise ValueError(f"unknown outcome {outcome!r}")
        with self._lock:
            entry = self.get(graph_id)
            utility = UTILITY_DECAY * entry.utility + (1 - UTILITY_DECAY) * UTILITY_REWARDS[outcome]
            entry.utility = min(1.0, max(0.0, utility))
            return entry.utility

    def _mark_stale(self):
        self._embedder = None
        for entry in self._entries.values():
            entry.embedding = None
            entry.source_embeddings = None

    # readers

    def embedder(self) -> LexicalEmbedder:
        with self._lock:
            if self._embedder is None:
                corpus = []
                for entry in self.snapshot():
                    corpus.append(entry.document)
                    corpus.extend(text for _, text in entry.sources)
                self._embedder = LexicalEmbedder(corpus)
            for entry in self._entries.values():
                if entry.embedding is None:
                    entry.embedding = self._embedder.embed_text(entry.document)
                    entry.source_embeddings = [self._embedder.embed_text(text) for _, text in entry.sources]
            return self._embedder

    def executors(self, timeout: float = 30.0) -> dict:
        return {entry.graph_id: entry.executor(timeout) for entry in self.snapshot()}

    def stores(self) -> Dict[str, TripleStore]:
        return {entry.graph_id: entry.store for entry in self.snapshot() if entry.store is not None}

    # manifest

    def save(self, path: Optional[str] = None):
        path = path or self.manifest_path
        if path is None:
            raise RegistryError("no manifest path to save to")
        base_dir = os.path.dirname(os.path.abspath(path))
        manifest = [entry.to_manifest(base_dir) for entry in self.snapshot()]
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")


def read_manifest(path: str) -> List[dict]:
    try:
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
    except (OSError, ValueError) as e:
        raise RegistryError(f"cannot read registry manifest {path}: {e}") from e
    if not isinstance(manifest, list):
        raise RegistryError(f"registry manifest {path} must be a JSON list")
    return manifest


def load_registry(path: str) -> GraphRegistry:
    base_dir = os.path.dirname(os.path.abspath(path))
    registry = GraphRegistry(path)
    for item in read_manifest(path):
        try:
            kind = item.get("kind", FILE)
            location = item["path"] if kind == FILE else item["url"]
            if kind == FILE and not os.path.isabs(location):
                location = os.path.join(base_dir, location)
            sources = [
                source if os.path.isabs(source) else os.path.join(base_dir, source)
                for source in item.get("sources", [])
            ]
            registry.register_graph(
                item["graph_id"],
                kind,
                location,
                metadata=item.get("metadata", ""),
                sources=sources,
                utility=float(item.get("utility", INITIAL_UTILITY)),
            )
        except KeyError as e:
            raise RegistryError(f"manifest entry {item!r} is missing {e}") from e
    return registry
