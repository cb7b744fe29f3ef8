"""Synthetic fixture graphs, registries and benchmark corpus.

Three graphs shaped like an industrial-symbiosis register (actors and the
resources they provide), a material classification pilot (CPA products,
waste codes, inspection cases) and a cross-border waste ledger (quantitative
flows keyed by HS code). A fourth, near-empty ledger archive shares the
ledger's schema and only appears in the fault-injected registry.

Everything is drawn from one numpy generator, so a seed always produces
byte-identical files.
"""
import json
import logging
import os
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import numpy as np
from attr import dataclass

from multiKGQA.corpus import BenchmarkItem, CROSS_KG, SINGLE_KG
from multiKGQA.execution import evaluate_local, term_to_json
from multiKGQA.rdf import (
    OWL_SAME_AS,
    RDF_TYPE,
    RDFS_DOMAIN,
    RDFS_LABEL,
    RDFS_RANGE,
    RDFS_SUBCLASS_OF,
    XSD_INTEGER,
    XSD_STRING,
    IRI,
    Literal,
    Term,
    Triple,
    escape_string,
    serialize_ntriples,
)
from multiKGQA.schema import RDF_PROPERTY, STANDARD_PREFIXES
from multiKGQA.sparql_parser import parse_sparql
from multiKGQA.triple_store import TripleStore, build_store

logger = logging.getLogger(__name__)

GIS = "http://example.org/german-is/"
EUP = "http://example.org/eu-pilot/"
WL = "http://example.org/waste-ledger/"

GERMAN_IS = "german_is"
EU_PILOT = "eu_pilot"
WASTE_LEDGER = "waste_ledger"
LEDGER_ARCHIVE = "a_ledger_archive"
REGISTER_MIRROR = "actor_register_mirror"

GRAPH_FILES = {
    GERMAN_IS: "german_is.ttl",
    EU_PILOT: "eu_pilot.nt",
    WASTE_LEDGER: "waste_ledger.nt",
    LEDGER_ARCHIVE: "ledger_archive.nt",
    REGISTER_MIRROR: "actor_register_mirror.nt",
}
LEDGER_NOTES = "waste_ledger_notes.txt"
REGISTRY = "registry.json"
FAULTS_REGISTRY = "registry_faults.json"
CORPUS = "corpus.jsonl"

METADATA = {
    GERMAN_IS: "Industrial symbiosis register of German actors: companies with their NACE code, "
    "city and employee count, the resources they provide and the materials they handle.",
    EU_PILOT: "EU pilot on material classification: materials with CPA product codes, material names "
    "and waste classification codes, and inspection cases with title, year and region.",
    WASTE_LEDGER: "Cross-border waste shipment ledger: flows of materials with trade codes (HS), "
    "quantity, shipper, origin country, destination country and flow year.",
}
METADATA[REGISTER_MIRROR] = METADATA[GERMAN_IS] + (
    " Mirrored snapshot of the actor register, kept for legacy lookups of actor names, cities and codes."
)

LEDGER_NOTES_TEXT = (
    "Every shipment flow is declared under the harmonized system: the HS code names the traded "
    "material, the quantity is given in tonnes, and origin and destination are the countries the "
    "flow leaves and enters.\n"
)

N_ACTORS = 120
N_RESOURCES = 24
N_CASES = 200
N_FLOWS = 400
GRAPH_SIZE_BOUNDS = (1000, 5000)

MATERIAL_NAMES = (
    "Rice", "Wheat", "Maize", "Barley", "Oats", "Rye", "Soybeans", "Potatoes", "Sugar beet", "Rapeseed",
    "Sunflower seed", "Apples", "Pears", "Grapes", "Olives", "Tomatoes", "Onions", "Cabbage", "Carrots",
    "Peas", "Lentils", "Hops", "Cotton", "Flax", "Hemp", "Wool", "Cork", "Sawdust", "Wood chips", "Bark",
    "Straw", "Hay", "Coffee husks", "Cocoa shells", "Tea waste", "Fish meal", "Bone meal", "Eggshells",
    "Whey", "Molasses",
)
WASTE_CODES = ("020103", "020104", "020107", "020199", "020304", "020601", "030101", "030105", "150101", "191207")
NAME_STEMS = ("Nordwerk", "Elbtal", "Rheinhof", "Isarmetall", "Spreeholz", "Mainpapier")
CITIES = ("Berlin", "Cologne", "Dresden", "Hamburg", "Leipzig", "Munich")
NACE_CODES = ("C10.1", "C16.2", "C17.1", "C20.1", "C24.4", "E38.3")
REGIONS = ("Bavaria", "Bremen", "Hesse", "Saxony")
COUNTRIES = ("Austria", "Czechia", "France", "Germany", "Netherlands", "Poland")

RICE_CPA = "011150"
RICE_HS = "100610"


@dataclass(frozen=True)
class Material:
    iri: str
    name: str
    cpa: str
    hs: str
    waste_code: str


@dataclass(frozen=True)
class Actor:
    iri: str
    name: str
    city: str
    nace: str
    employees: int
    company: bool
    resource: str
    material: str


@dataclass(frozen=True)
class Case:
    iri: str
    title: str
    year: int
    region: str
    material: str


@dataclass(frozen=True)
class Flow:
    iri: str
    material: str
    hs: str
    shipper: str
    quantity: int
    origin: str
    destination: str
    year: int


@dataclass
class FixtureWorld:
    materials: List[Material]
    actors: List[Actor]
    resources: List[Tuple[str, Material]]
    cases: List[Case]
    flows: List[Flow]

    def material(self, iri: str) -> Material:
        return next(m for m in self.materials if m.iri == iri)

    def material_by_cpa(self, cpa: str) -> Material:
        return next(m for m in self.materials if m.cpa == cpa)


def _choice(rng: np.random.Generator, options):
    return options[int(rng.integers(len(options)))]


def build_world(seed: int = 0) -> FixtureWorld:
    rng = np.random.default_rng(seed)
    materials = []
    for i, name in enumerate(MATERIAL_NAMES):
        cpa = RICE_CPA if i == 0 else f"0{11200 + 10 * i:05d}"
        hs = RICE_HS if i == 0 else str(100700 + 100 * i)
        materials.append(Material(f"{EUP}material/cpa-{cpa}", name, cpa, hs, WASTE_CODES[i % len(WASTE_CODES)]))

    resources = [(f"{GIS}resource/r{j:02d}", materials[j]) for j in range(N_RESOURCES)]
    actors = [
        Actor(
            iri=f"{GIS}actor/a{i:03d}",
            name=f"{NAME_STEMS[i % len(NAME_STEMS)]} {i:03d}",
            city=_choice(rng, CITIES),
            nace=_choice(rng, NACE_CODES),
            employees=int(rng.integers(5, 1000)),
            company=i % 3 == 0,
            resource=resources[i % N_RESOURCES][0],
            material=materials[i % len(materials)].iri,
        )
        for i in range(N_ACTORS)
    ]
    cases = [
        Case(
            iri=f"{EUP}case/c{k:03d}",
            title=f"Inspection {k:03d}",
            year=int(rng.integers(2015, 2024)),
            region=_choice(rng, REGIONS),
            material=_choice(rng, materials).iri,
        )
        for k in range(N_CASES)
    ]
    flows = []
    for n in range(N_FLOWS):
        material = materials[n % len(materials)]
        flows.append(
            Flow(
                iri=f"{WL}flow/f{n:04d}",
                material=material.iri,
                hs=material.hs,
                shipper=actors[(7 * n) % N_ACTORS].iri,
                quantity=int(rng.integers(10, 5000)),
                origin=_choice(rng, COUNTRIES),
                destination=_choice(rng, COUNTRIES),
                year=int(rng.integers(2018, 2024)),
            )
        )
    return FixtureWorld(materials, actors, resources, cases, flows)


# triples


def _t(subject: str, predicate: str, obj: Term) -> Triple:
    return Triple(IRI(subject), IRI(predicate), obj)


def _integer(value: int) -> Literal:
    return Literal(str(value), datatype=XSD_INTEGER)


def _schema(
    namespace: str, classes: Dict[str, str], properties: List[Tuple[str, str, str, Optional[str]]]
) -> List[Triple]:
    """Class labels, then (local name, domain, label, range) property declarations."""
    triples = []
    for local, label in classes.items():
        triples.append(_t(namespace + local, RDF_TYPE, IRI(STANDARD_PREFIXES["rdfs"] + "Class")))
        triples.append(_t(namespace + local, RDFS_LABEL, Literal(label)))
    for local, domain, label, range_ in properties:
        triples.append(_t(namespace + local, RDF_TYPE, IRI(RDF_PROPERTY)))
        triples.append(_t(namespace + local, RDFS_DOMAIN, IRI(namespace + domain)))
        triples.append(_t(namespace + local, RDFS_LABEL, Literal(label)))
        if range_ is not None:
            triples.append(_t(namespace + local, RDFS_RANGE, IRI(range_)))
    return triples


def german_is_triples(world: FixtureWorld) -> List[Triple]:
    triples = _schema(
        GIS,
        {"Actor": "actor", "Company": "company", "Resource": "resource"},
        [
            ("actorName", "Actor", "actor name", XSD_STRING),
            ("naceCode", "Actor", "NACE code", None),
            ("city", "Actor", "city", None),
            ("employeeCount", "Actor", "employee count", XSD_INTEGER),
            ("providesResource", "Actor", "provided resource", GIS + "Resource"),
            ("handlesMaterial", "Actor", "handled material", None),
            ("resourceName", "Resource", "resource name", XSD_STRING),
        ],
    )
    triples.append(_t(GIS + "Company", RDFS_SUBCLASS_OF, IRI(GIS + "Actor")))
    for actor in world.actors:
        triples.append(_t(actor.iri, RDF_TYPE, IRI(GIS + "Actor")))
        if actor.company:
            triples.append(_t(actor.iri, RDF_TYPE, IRI(GIS + "Company")))
        triples.extend(
            [
                _t(actor.iri, GIS + "actorName", Literal(actor.name)),
                _t(actor.iri, GIS + "city", Literal(actor.city)),
                _t(actor.iri, GIS + "naceCode", Literal(actor.nace)),
                _t(actor.iri, GIS + "employeeCount", _integer(actor.employees)),
                _t(actor.iri, GIS + "providesResource", IRI(actor.resource)),
                _t(actor.iri, GIS + "handlesMaterial", IRI(actor.material)),
            ]
        )
    for iri, material in world.resources:
        triples.extend(
            [
                _t(iri, RDF_TYPE, IRI(GIS + "Resource")),
                _t(iri, GIS + "resourceName", Literal(material.name)),
                _t(iri, RDFS_LABEL, Literal(material.name)),
                _t(iri, OWL_SAME_AS, IRI(material.iri)),
            ]
        )
    return triples


def eu_pilot_triples(world: FixtureWorld) -> List[Triple]:
    triples = _schema(
        EUP,
        {"Material": "material", "Case": "case"},
        [
            ("cpaCode", "Material", "CPA code", XSD_STRING),
            ("materialName", "Material", "material name", XSD_STRING),
            ("wasteCode", "Material", "waste classification code", XSD_STRING),
            ("caseTitle", "Case", "case title", XSD_STRING),
            ("caseYear", "Case", "case year", XSD_INTEGER),
            ("region", "Case", "region", None),
            ("caseMaterial", "Case", "case material", EUP + "Material"),
        ],
    )
    for material in world.materials:
        triples.extend(
            [
                _t(material.iri, RDF_TYPE, IRI(EUP + "Material")),
                _t(material.iri, EUP + "cpaCode", Literal(material.cpa)),
                _t(material.iri, EUP + "materialName", Literal(material.name)),
                _t(material.iri, EUP + "wasteCode", Literal(material.waste_code)),
                _t(material.iri, RDFS_LABEL, Literal(material.name)),
            ]
        )
    for case in world.cases:
        triples.extend(
            [
                _t(case.iri, RDF_TYPE, IRI(EUP + "Case")),
                _t(case.iri, EUP + "caseTitle", Literal(case.title)),
                _t(case.iri, EUP + "caseYear", _integer(case.year)),
                _t(case.iri, EUP + "region", Literal(case.region)),
                _t(case.iri, EUP + "caseMaterial", IRI(case.material)),
            ]
        )
    return triples


def _ledger_schema() -> List[Triple]:
    return _schema(
        WL,
        {"Flow": "flow"},
        [
            ("hsCode", "Flow", "HS code", XSD_STRING),
            ("material", "Flow", "material", None),
            ("shipper", "Flow", "shipper", None),
            ("quantity", "Flow", "quantity", XSD_INTEGER),
            ("originCountry", "Flow", "origin country", None),
            ("destinationCountry", "Flow", "destination country", None),
            ("flowYear", "Flow", "flow year", XSD_INTEGER),
        ],
    )


def waste_ledger_triples(world: FixtureWorld) -> List[Triple]:
    triples = _ledger_schema()
    for flow in world.flows:
        triples.extend(
            [
                _t(flow.iri, RDF_TYPE, IRI(WL + "Flow")),
                _t(flow.iri, WL + "hsCode", Literal(flow.hs)),
                _t(flow.iri, WL + "material", IRI(flow.material)),
                _t(flow.iri, WL + "shipper", IRI(flow.shipper)),
                _t(flow.iri, WL + "quantity", _integer(flow.quantity)),
                _t(flow.iri, WL + "originCountry", Literal(flow.origin)),
                _t(flow.iri, WL + "destinationCountry", Literal(flow.destination)),
                _t(flow.iri, WL + "flowYear", _integer(flow.year)),
            ]
        )
    return triples


def ledger_archive_triples() -> List[Triple]:
    return _ledger_schema() + [_t(WL + "flow/archive-0", RDF_TYPE, IRI(WL + "Flow"))]


def register_mirror_triples(world: FixtureWorld) -> List[Triple]:
    """An older snapshot of the actor register: same schema, only the first half of the actors."""
    dropped = {IRI(actor.iri) for actor in world.actors[len(world.actors) // 2 :]}
    return [triple for triple in german_is_triples(world) if triple.subject not in dropped]


# turtle writer for the subset the reader accepts

_TURTLE_PREFIXES = (
    ("gis", GIS),
    ("eup", EUP),
    ("rdf", STANDARD_PREFIXES["rdf"]),
    ("rdfs", STANDARD_PREFIXES["rdfs"]),
    ("owl", STANDARD_PREFIXES["owl"]),
    ("xsd", STANDARD_PREFIXES["xsd"]),
)


def _turtle_term(term: Term) -> str:
    if isinstance(term, IRI):
        for prefix, namespace in _TURTLE_PREFIXES:
            local = term.value[len(namespace) :]
            if term.value.startswith(namespace) and local.replace("-", "").replace("_", "").isalnum():
                return f"{prefix}:{local}"
        return term.n3()
    if term.datatype == XSD_INTEGER:
        return term.lexical
    return f'"{escape_string(term.lexical)}"' if term.datatype is None else term.n3()


def serialize_turtle(triples: List[Triple]) -> str:
    lines = [f"@prefix {prefix}: <{namespace}> ." for prefix, namespace in _TURTLE_PREFIXES]
    by_subject: Dict[Term, Dict[IRI, List[Term]]] = defaultdict(lambda: defaultdict(list))
    for triple in triples:
        by_subject[triple.subject][triple.predicate].append(triple.object)
    for subject, predicates in by_subject.items():
        lines.append("")
        statements = []
        for predicate, objects in predicates.items():
            verb = "a" if predicate.value == RDF_TYPE else _turtle_term(predicate)
            statements.append(f"{verb} " + ", ".join(_turtle_term(o) for o in objects))
        lines.append(f"{_turtle_term(subject)} " + " ;\n    ".join(statements) + " .")
    return "\n".join(lines) + "\n"


# corpus


def _gold(query: str, store: TripleStore) -> dict:
    return evaluate_local(parse_sparql(query), store).to_sparql_json()


def _rows(variables: List[str], rows: List[Dict[str, Term]]) -> dict:
    return {
        "head": {"vars": variables},
        "results": {"bindings": [{k: term_to_json(v) for k, v in row.items()} for row in rows]},
    }


def _distinct(values):
    return list(dict.fromkeys(values))


def _above(values: List[int], rank: int) -> int:
    """The ``rank``-th largest distinct value, so that ``rank`` distinct values lie above it."""
    distinct = sorted(set(values), reverse=True)
    return distinct[min(rank, len(distinct) - 1)]


def _below(values: List[int], rank: int) -> int:
    distinct = sorted(set(values))
    return distinct[min(rank, len(distinct) - 1)]


class CorpusBuilder:
    def __init__(self, world: FixtureWorld, stores: Dict[str, TripleStore], rng: np.random.Generator):
        self.world = world
        self.stores = stores
        self.rng = rng
        self.items: List[BenchmarkItem] = []
        self._counters: Dict[str, int] = defaultdict(int)

    def _id(self, prefix: str) -> str:
        self._counters[prefix] += 1
        return f"{prefix}-{self._counters[prefix]:03d}"

    def _pick(self, options, k: int) -> list:
        indices = self.rng.choice(len(options), size=min(k, len(options)), replace=False)
        return [options[int(i)] for i in sorted(indices)]

    def single(self, prefix: str, graph_id: str, question: str, query: str):
        self.items.append(
            BenchmarkItem(
                id=self._id(prefix),
                question=question,
                gold_query=query,
                gold_answer=_gold(query, self.stores[graph_id]),
                gold_graphs=[graph_id],
                tags=[SINGLE_KG, graph_id],
            )
        )

    def cross(self, prefix: str, graphs: List[str], question: str, answer: dict, clarification: Optional[str] = None):
        self.items.append(
            BenchmarkItem(
                id=self._id(prefix),
                question=question,
                clarification=clarification,
                gold_answer=answer,
                gold_graphs=list(graphs),
                tags=[CROSS_KG] + sorted(set(graphs)),
            )
        )

    # single-graph forms

    def german_is(self):
        actors = self.world.actors
        for nace in self._pick(NACE_CODES, 6):
            self.single(
                "gis", GERMAN_IS, f"Which actors have NACE code {nace}?",
                f'SELECT ?x WHERE {{ ?x a <{GIS}Actor> . ?x <{GIS}naceCode> "{nace}" }}',
            )
        for actor in self._pick(actors, 10):
            self.single(
                "gis", GERMAN_IS, f'What is the city of the actor with actor name "{actor.name}"?',
                f'SELECT ?v WHERE {{ ?x a <{GIS}Actor> . ?x <{GIS}actorName> "{actor.name}" . ?x <{GIS}city> ?v }}',
            )
        employees = [a.employees for a in actors]
        for rank in (4, 9):
            threshold = _above(employees, rank)
            self.single(
                "gis", GERMAN_IS, f"Which actors have an employee count greater than {threshold}?",
                f"SELECT ?x WHERE {{ ?x a <{GIS}Actor> . ?x <{GIS}employeeCount> ?v . FILTER(?v > {threshold}) }}",
            )
            threshold = _below(employees, rank)
            self.single(
                "gis", GERMAN_IS, f"Which actors have an employee count less than {threshold}?",
                f"SELECT ?x WHERE {{ ?x a <{GIS}Actor> . ?x <{GIS}employeeCount> ?v . FILTER(?v < {threshold}) }}",
            )
        for city in self._pick(CITIES, 6):
            threshold = _above([a.employees for a in actors if a.city == city], 3)
            self.single(
                "gis", GERMAN_IS,
                f"Which actors in city {city} have an employee count greater than {threshold}?",
                f'SELECT ?x WHERE {{ ?x a <{GIS}Actor> . ?x <{GIS}city> "{city}" . '
                f"?x <{GIS}employeeCount> ?v . FILTER(?v > {threshold}) }}",
            )
        for noun, cls in (("companies", "Company"), ("actors", "Actor"), ("resources", "Resource")):
            self.single(
                "gis", GERMAN_IS, f"How many {noun} are there?",
                f"SELECT (COUNT(?x) AS ?n) WHERE {{ ?x a <{GIS}{cls}> }}",
            )
        for mention, local in (("city", "city"), ("NACE code", "naceCode")):
            self.single(
                "gis", GERMAN_IS, f"How many actors are there per {mention}?",
                f"SELECT ?g (COUNT(?x) AS ?n) WHERE {{ ?x a <{GIS}Actor> . ?x <{GIS}{local}> ?g }} GROUP BY ?g",
            )
        for _ in range(4):
            left, right = self._pick(actors, 2)
            self.single(
                "gis", GERMAN_IS,
                f'Compare the employee count of actor name "{left.name}" and actor name "{right.name}".',
                f"SELECT ?k ?v WHERE {{ ?x a <{GIS}Actor> . ?x <{GIS}actorName> ?k . ?x <{GIS}employeeCount> ?v . "
                f'FILTER(?k = "{left.name}" || ?k = "{right.name}") }} ORDER BY DESC(?v)',
            )

    def eu_pilot(self):
        materials, cases = self.world.materials, self.world.cases
        codes = [WASTE_CODES[0]] + self._pick(WASTE_CODES[1:], 5)
        for code in codes:
            self.single(
                "eup", EU_PILOT, f"Which materials have waste code {code}?",
                f'SELECT ?x WHERE {{ ?x a <{EUP}Material> . ?x <{EUP}wasteCode> "{code}" }}',
            )
        for material in [materials[0]] + self._pick(materials[1:], 5):
            self.single(
                "eup", EU_PILOT, f"What is the material name of the material with CPA code {material.cpa}?",
                f'SELECT ?v WHERE {{ ?x a <{EUP}Material> . ?x <{EUP}cpaCode> "{material.cpa}" . ?x <{EUP}materialName> ?v }}',
            )
        years = [c.year for c in cases]
        for rank in (1, 3):
            threshold = _above(years, rank)
            self.single(
                "eup", EU_PILOT, f"Which cases have a case year greater than {threshold}?",
                f"SELECT ?x WHERE {{ ?x a <{EUP}Case> . ?x <{EUP}caseYear> ?v . FILTER(?v > {threshold}) }}",
            )
        self.single(
            "eup", EU_PILOT, "How many cases are there per region?",
            f"SELECT ?g (COUNT(?x) AS ?n) WHERE {{ ?x a <{EUP}Case> . ?x <{EUP}region> ?g }} GROUP BY ?g",
        )
        self.single(
            "eup", EU_PILOT, "How many materials are there?",
            f"SELECT (COUNT(?x) AS ?n) WHERE {{ ?x a <{EUP}Material> }}",
        )
        for region in REGIONS:
            threshold = _above([c.year for c in cases if c.region == region], 2)
            self.single(
                "eup", EU_PILOT, f"Which cases in region {region} have a case year greater than {threshold}?",
                f'SELECT ?x WHERE {{ ?x a <{EUP}Case> . ?x <{EUP}region> "{region}" . '
                f"?x <{EUP}caseYear> ?v . FILTER(?v > {threshold}) }}",
            )
        for _ in range(2):
            left, right = self._pick(cases, 2)
            self.single(
                "eup", EU_PILOT,
                f'Compare the case year of case title "{left.title}" and case title "{right.title}".',
                f"SELECT ?k ?v WHERE {{ ?x a <{EUP}Case> . ?x <{EUP}caseTitle> ?k . ?x <{EUP}caseYear> ?v . "
                f'FILTER(?k = "{left.title}" || ?k = "{right.title}") }} ORDER BY DESC(?v)',
            )

    def waste_ledger(self):
        flows = self.world.flows
        quantities = [f.quantity for f in flows]
        for rank in (5, 10, 20):
            threshold = _above(quantities, rank)
            self.single(
                "wl", WASTE_LEDGER, f"Which flows have a quantity greater than {threshold}?",
                f"SELECT ?x WHERE {{ ?x a <{WL}Flow> . ?x <{WL}quantity> ?v . FILTER(?v > {threshold}) }}",
            )
        for country in self._pick(COUNTRIES, 4):
            self.single(
                "wl", WASTE_LEDGER, f"Which flows have origin country {country}?",
                f'SELECT ?x WHERE {{ ?x a <{WL}Flow> . ?x <{WL}originCountry> "{country}" }}',
            )
        for mention, local in (("destination country", "destinationCountry"), ("origin country", "originCountry")):
            self.single(
                "wl", WASTE_LEDGER, f"How many flows are there per {mention}?",
                f"SELECT ?g (COUNT(?x) AS ?n) WHERE {{ ?x a <{WL}Flow> . ?x <{WL}{local}> ?g }} GROUP BY ?g",
            )
        for country in self._pick(COUNTRIES, 3):
            threshold = _above([f.quantity for f in flows if f.destination == country], 3)
            self.single(
                "wl", WASTE_LEDGER,
                f"Which flows in destination country {country} have a quantity greater than {threshold}?",
                f'SELECT ?x WHERE {{ ?x a <{WL}Flow> . ?x <{WL}destinationCountry> "{country}" . '
                f"?x <{WL}quantity> ?v . FILTER(?v > {threshold}) }}",
            )
        rice = self.world.materials[0]
        self.single(
            "wl", WASTE_LEDGER, "Which HS codes co-occur with rice?",
            f"SELECT DISTINCT ?v WHERE {{ ?x ?link <{rice.iri}> . ?x <{WL}hsCode> ?v }}",
        )

    # cross-graph forms

    def _hs_rows(self, materials: List[Material]) -> dict:
        rows = []
        for material in materials:
            for hs in _distinct(f.hs for f in self.world.flows if f.material == material.iri):
                rows.append({"x": IRI(material.iri), "v": Literal(hs)})
        return _rows(["x", "v"], rows)

    def cross_graph(self):
        world = self.world
        materials = world.materials
        for material in [materials[0]] + self._pick(materials[1:], 7):
            self.cross(
                "xkg", [EU_PILOT, WASTE_LEDGER],
                f"For CPA code {material.cpa}, which HS codes co-occur with it?",
                self._hs_rows([material]),
            )
        for code in [WASTE_CODES[0]] + self._pick(WASTE_CODES[1:], 3):
            self.cross(
                "xkg", [EU_PILOT, WASTE_LEDGER],
                f"For waste code {code}, which HS codes co-occur with it?",
                self._hs_rows([m for m in materials if m.waste_code == code]),
            )
        for material in self._pick(materials, 6):
            names = _distinct(a.name for a in world.actors if a.material == material.iri)
            self.cross(
                "xkg", [EU_PILOT, GERMAN_IS],
                f"For CPA code {material.cpa}, which actor names co-occur with it?",
                _rows(["x", "v"], [{"x": IRI(material.iri), "v": Literal(name)} for name in names]),
            )
        for actor in self._pick(world.actors, 6):
            codes = _distinct(f.hs for f in world.flows if f.shipper == actor.iri)
            self.cross(
                "xkg", [GERMAN_IS, WASTE_LEDGER],
                f'For actor name "{actor.name}", which HS codes co-occur with it?',
                _rows(["x", "v"], [{"x": IRI(actor.iri), "v": Literal(code)} for code in codes]),
            )
        resourced = [material for _, material in world.resources]
        for material in [resourced[0]] + self._pick(resourced[1:], 3):
            self.cross(
                "xkg", [GERMAN_IS, EU_PILOT],
                f'Which resources have resource name "{material.name}", '
                f'and which materials have material name "{material.name}"?',
                # aligned through owl:sameAs onto the smaller (pilot) IRI
                _rows(["x"], [{"x": IRI(material.iri)}]),
            )
        for material in [materials[0]] + self._pick(materials[1:], 2):
            self.cross(
                "xkg", [EU_PILOT, WASTE_LEDGER],
                "For product code found in the resources, which trade codes co-occur with it?",
                self._hs_rows([material]),
                clarification=f"CPA code {material.cpa}",
            )

    def build(self) -> List[BenchmarkItem]:
        self.german_is()
        self.eu_pilot()
        self.waste_ledger()
        self.cross_graph()
        return self.items


def build_corpus(world: FixtureWorld, stores: Dict[str, TripleStore], seed: int = 0) -> List[BenchmarkItem]:
    return CorpusBuilder(world, stores, np.random.default_rng(seed + 1)).build()


# files


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _manifest(graph_ids: List[str], utilities: Dict[str, float]) -> str:
    entries = []
    for graph_id in graph_ids:
        ledger = graph_id in (WASTE_LEDGER, LEDGER_ARCHIVE)
        entries.append(
            {
                "graph_id": graph_id,
                "kind": "file",
                "path": GRAPH_FILES[graph_id],
                "metadata": METADATA[WASTE_LEDGER if ledger else graph_id],
                "sources": [LEDGER_NOTES] if ledger else [],
                "utility": utilities.get(graph_id, 0.5),
            }
        )
    return json.dumps(entries, indent=2) + "\n"


def make_fixtures(output_dir: str, seed: int = 0) -> Dict[str, str]:
    """Writes the graphs, both registries and the corpus; returns the written paths by name."""
    os.makedirs(output_dir, exist_ok=True)
    world = build_world(seed)
    graphs = {
        GERMAN_IS: german_is_triples(world),
        EU_PILOT: eu_pilot_triples(world),
        WASTE_LEDGER: waste_ledger_triples(world),
        LEDGER_ARCHIVE: ledger_archive_triples(),
        REGISTER_MIRROR: register_mirror_triples(world),
    }
    for graph_id in (GERMAN_IS, EU_PILOT, WASTE_LEDGER):
        size = len(set(graphs[graph_id]))
        if not GRAPH_SIZE_BOUNDS[0] <= size <= GRAPH_SIZE_BOUNDS[1]:
            logger.warning("fixture graph %s has %d triples, outside %s", graph_id, size, GRAPH_SIZE_BOUNDS)
    stores = {graph_id: build_store(graph_id, triples) for graph_id, triples in graphs.items()}

    written = {}
    for graph_id, triples in graphs.items():
        path = os.path.join(output_dir, GRAPH_FILES[graph_id])
        _write(path, serialize_turtle(triples) if path.endswith(".ttl") else serialize_ntriples(triples))
        written[graph_id] = path

    written["notes"] = os.path.join(output_dir, LEDGER_NOTES)
    _write(written["notes"], LEDGER_NOTES_TEXT)
    written["registry"] = os.path.join(output_dir, REGISTRY)
    _write(written["registry"], _manifest([GERMAN_IS, EU_PILOT, WASTE_LEDGER], {}))
    written["registry_faults"] = os.path.join(output_dir, FAULTS_REGISTRY)
    faults = [LEDGER_ARCHIVE, REGISTER_MIRROR, GERMAN_IS, EU_PILOT, WASTE_LEDGER]
    _write(written["registry_faults"], _manifest(faults, {LEDGER_ARCHIVE: 1.0, REGISTER_MIRROR: 0.0}))

    items = build_corpus(world, stores, seed)
    written["corpus"] = os.path.join(output_dir, CORPUS)
    _write(written["corpus"], "".join(json.dumps(item.to_json(), ensure_ascii=False) + "\n" for item in items))
    logger.info("wrote %d graphs and %d corpus items to %s", len(graphs), len(items), output_dir)
    return written
