"""Schema slices: the predicates, classes, hierarchy and domain/range of one graph."""
import hashlib
import json
import re
from collections import Counter, defaultdict
from functools import cached_property
from typing import Dict, Optional, Set, Tuple

import networkx as nx
from attr import Factory, dataclass
from rdflib.namespace import OWL, RDF, RDFS, XSD

from multiKGQA.rdf import (
    IRI,
    RDF_TYPE,
    RDFS_DOMAIN,
    RDFS_LABEL,
    RDFS_RANGE,
    RDFS_SUBCLASS_OF,
    XSD_STRING,
    Literal,
)
from multiKGQA.triple_store import TripleStore

RDF_LANG_STRING = str(RDF.langString)
RDF_PROPERTY = str(RDF.Property)

STANDARD_PREFIXES = {
    "rdf": str(RDF),
    "rdfs": str(RDFS),
    "owl": str(OWL),
    "xsd": str(XSD),
}


@dataclass
class SchemaSlice:
    graph_id: str
    predicates: Dict[str, int] = Factory(dict)
    classes: Dict[str, int] = Factory(dict)
    subclass_edges: Set[Tuple[str, str]] = Factory(set)
    domains: Dict[str, Set[str]] = Factory(dict)
    ranges: Dict[str, Set[str]] = Factory(dict)
    declared_domains: Dict[str, Set[str]] = Factory(dict)
    declared_ranges: Dict[str, Set[str]] = Factory(dict)
    labels: Dict[str, Set[str]] = Factory(dict)
    namespaces: Dict[str, str] = Factory(dict)

    @cached_property
    def hierarchy(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.classes)
        graph.add_edges_from(
            (child, parent) for child, parent in self.subclass_edges if child != parent
        )
        return graph

    @cached_property
    def subclass_cycles(self):
        return sorted(sorted(cycle) for cycle in nx.simple_cycles(self.hierarchy))

    def is_subclass(self, child: str, parent: str) -> bool:
        if child == parent:
            return True
        if child not in self.hierarchy or parent not in self.hierarchy:
            return False
        return nx.has_path(self.hierarchy, child, parent)

    def is_inferred_domain(self, predicate: str, cls: str) -> bool:
        return cls not in self.declared_domains.get(predicate, set())

    def is_inferred_range(self, predicate: str, cls: str) -> bool:
        return cls not in self.declared_ranges.get(predicate, set())

    def label_of(self, iri: str) -> str:
        labels = self.labels.get(iri)
        if labels:
            return sorted(labels)[0]
        return local_name(iri)

    def prefix_for(self, iri: str) -> Optional[Tuple[str, str]]:
        for prefix, namespace in sorted(self.namespaces.items()):
            if iri.startswith(namespace):
                return prefix, namespace
        return None

    def to_json(self) -> dict:
        def constraints(declared, merged):
            return {
                predicate: {
                    cls: ("declared" if cls in declared.get(predicate, ()) else "inferred")
                    for cls in sorted(classes)
                }
                for predicate, classes in sorted(merged.items())
            }

        return {
            "graph_id": self.graph_id,
            "predicates": dict(sorted(self.predicates.items())),
            "classes": dict(sorted(self.classes.items())),
            "subclass_edges": [list(edge) for edge in sorted(self.subclass_edges)],
            "domains": constraints(self.declared_domains, self.domains),
            "ranges": constraints(self.declared_ranges, self.ranges),
            "labels": {iri: sorted(ls) for iri, ls in sorted(self.labels.items())},
            "namespaces": dict(sorted(self.namespaces.items())),
        }

    def content_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_json(), sort_keys=True).encode("utf-8")
        ).hexdigest()


def local_name(iri: str) -> str:
    return re.split(r"[/#:]", iri.rstrip("/#"))[-1]


def namespace_of(iri: str) -> str:
    cut = max(iri.rfind("/"), iri.rfind("#"))
    return iri[: cut + 1]


def suggest_prefix(namespace: str) -> str:
    segment = re.split(r"[/#]", namespace.rstrip("/#"))[-1]
    prefix = re.sub(r"[^a-z0-9]", "", segment.lower())
    if not prefix or not prefix[0].isalpha():
        prefix = "ns" + prefix
    return prefix


def extract_schema(
    store: TripleStore, prefixes: Optional[Dict[str, str]] = None
) -> SchemaSlice:
    predicates = Counter()
    classes = Counter()
    subclass_edges = set()
    declared_domains = defaultdict(set)
    declared_ranges = defaultdict(set)
    labels = defaultdict(set)
    types_of = defaultdict(set)

    for triple in store.triples:
        predicate = triple.predicate.value
        predicates[predicate] += 1
        if predicate == RDF_TYPE and isinstance(triple.object, IRI):
            classes[triple.object.value] += 1
            types_of[triple.subject].add(triple.object.value)
        elif not isinstance(triple.subject, IRI) or not isinstance(triple.object, (IRI, Literal)):
            continue
        elif predicate == RDFS_SUBCLASS_OF and isinstance(triple.object, IRI):
            subclass_edges.add((triple.subject.value, triple.object.value))
        elif predicate == RDFS_DOMAIN and isinstance(triple.object, IRI):
            declared_domains[triple.subject.value].add(triple.object.value)
        elif predicate == RDFS_RANGE and isinstance(triple.object, IRI):
            declared_ranges[triple.subject.value].add(triple.object.value)
        elif predicate == RDFS_LABEL and isinstance(triple.object, Literal):
            labels[triple.subject.value].add(triple.object.lexical)

    # predicates that are only declared still belong to the slice, with zero usage
    for triple in store.triples:
        if isinstance(triple.subject, IRI) and (
            triple.predicate.value in (RDFS_DOMAIN, RDFS_RANGE)
            or (
                triple.predicate.value == RDF_TYPE
                and isinstance(triple.object, IRI)
                and triple.object.value == RDF_PROPERTY
            )
        ):
            predicates.setdefault(triple.subject.value, 0)
    for child, parent in subclass_edges:
        classes.setdefault(child, 0)
        classes.setdefault(parent, 0)

    observed_domains = defaultdict(set)
    observed_ranges = defaultdict(set)
    for triple in store.triples:
        predicate = triple.predicate.value
        if predicate in (RDF_TYPE, RDFS_LABEL, RDFS_SUBCLASS_OF, RDFS_DOMAIN, RDFS_RANGE):
            continue
        observed_domains[predicate].update(types_of.get(triple.subject, ()))
        if isinstance(triple.object, Literal):
            if triple.object.language is not None:
                observed_ranges[predicate].add(RDF_LANG_STRING)
            else:
                observed_ranges[predicate].add(triple.object.datatype or XSD_STRING)
        else:
            observed_ranges[predicate].update(types_of.get(triple.object, ()))

    domains = _merge(declared_domains, observed_domains)
    ranges = _merge(declared_ranges, observed_ranges)

    namespaces = dict(STANDARD_PREFIXES)
    for iri in sorted(set(predicates) | set(classes)):
        namespace = namespace_of(iri)
        if namespace and namespace not in namespaces.values():
            prefix = suggest_prefix(namespace)
            while prefix in namespaces:
                prefix += "x"
            namespaces[prefix] = namespace
    namespaces.update(prefixes or {})

    return SchemaSlice(
        graph_id=store.graph_id,
        predicates=dict(predicates),
        classes=dict(classes),
        subclass_edges=subclass_edges,
        domains=domains,
        ranges=ranges,
        declared_domains={p: set(c) for p, c in declared_domains.items()},
        declared_ranges={p: set(c) for p, c in declared_ranges.items()},
        labels={iri: set(ls) for iri, ls in labels.items()},
        namespaces=namespaces,
    )


def _merge(declared, observed) -> Dict[str, Set[str]]:
    merged = {}
    for predicate in set(declared) | set(observed):
        classes = set(declared.get(predicate, ())) | set(observed.get(predicate, ()))
        if classes:
            merged[predicate] = classes
    return merged


def schema_summary(slice: SchemaSlice, top: int = 25) -> str:
    lines = [f"graph: {slice.graph_id}"]
    ranked_predicates = sorted(slice.predicates.items(), key=lambda kv: (-kv[1], kv[0]))
    for iri, count in ranked_predicates[:top]:
        lines.append(f"predicate {local_name(iri)} <{iri}> ({count}){_labels(slice, iri)}")
    ranked_classes = sorted(slice.classes.items(), key=lambda kv: (-kv[1], kv[0]))
    for iri, count in ranked_classes[:top]:
        lines.append(f"class {local_name(iri)} <{iri}> ({count}){_labels(slice, iri)}")
    return "\n".join(lines) + "\n"


def _labels(slice: SchemaSlice, iri: str) -> str:
    labels = slice.labels.get(iri)
    if not labels:
        return ""
    return " label: " + "; ".join(sorted(labels))
