"""Query template library: one SPARQL skeleton per intent and arity."""
import json
import logging
import os
import re
from typing import Dict, List, Optional, Tuple

from attr import dataclass

from multiKGQA.errors import ConfigError, NoTemplate, SparqlError
from multiKGQA.lexicon import DATA_DIR
from multiKGQA.sparql_ast import SparqlQuery
from multiKGQA.sparql_parser import parse_sparql
from multiKGQA.subgoals import INTENTS

logger = logging.getLogger(__name__)

DEFAULT_TEMPLATES = os.path.join(DATA_DIR, "templates.json")

SLOT_KINDS = ("class", "predicate", "value", "operator", "variable")
PLACEHOLDER = re.compile(r"\{([A-Z][A-Z_0-9]*)\}")

_SAMPLES = {
    "class": lambda name: f"<urn:slot:{name}>",
    "predicate": lambda name: f"<urn:slot:{name}>",
    "value": lambda name: f'"{name}"',
    "operator": lambda _: "=",
    "variable": lambda name: f"?slot_{name.lower()}",
}


@dataclass(frozen=True)
class QueryTemplate:
    id: str
    intent: str
    arity: int
    skeleton: str
    slots: Dict[str, str]

    @property
    def placeholders(self) -> List[str]:
        seen = {}
        for name in PLACEHOLDER.findall(self.skeleton):
            seen.setdefault(name, None)
        return list(seen)

    def slots_of(self, kind: str) -> List[str]:
        return [name for name in self.placeholders if self.slots[name] == kind]

    def fill(self, values: Dict[str, str]) -> str:
        missing = [name for name in self.placeholders if name not in values]
        if missing:
            raise KeyError(f"template {self.id} has unfilled slots {missing}")
        return PLACEHOLDER.sub(lambda match: values[match.group(1)], self.skeleton)

    def sample(self) -> SparqlQuery:
        """The skeleton with every slot replaced by a well-formed stand-in of its kind."""
        return parse_sparql(self.fill({name: _SAMPLES[kind](name) for name, kind in self.slots.items()}))


def check_template(template: QueryTemplate) -> QueryTemplate:
    if template.intent not in INTENTS:
        raise ConfigError(f"template {template.id} has unknown intent {template.intent!r}")
    if set(template.placeholders) != set(template.slots):
        raise ConfigError(
            f"template {template.id}: placeholders {sorted(template.placeholders)} "
            f"do not match slot spec {sorted(template.slots)}"
        )
    for name, kind in template.slots.items():
        if kind not in SLOT_KINDS:
            raise ConfigError(f"template {template.id}: slot {name} has unknown kind {kind!r}")
    try:
        template.sample()
    except SparqlError as e:
        raise ConfigError(f"template {template.id} is not valid SPARQL: {e}") from e
    return template


class TemplateLibrary:
    def __init__(self, templates: List[QueryTemplate]):
        self._by_key: Dict[Tuple[str, int], QueryTemplate] = {}
        for template in templates:
            key = (template.intent, template.arity)
            if key in self._by_key:
                raise ConfigError(f"two templates for {template.intent} with arity {template.arity}")
            self._by_key[key] = check_template(template)

    def __len__(self) -> int:
        return len(self._by_key)

    def __iter__(self):
        return iter(self._by_key[key] for key in sorted(self._by_key))

    def select(self, intent: str, arity: int) -> QueryTemplate:
        try:
            return self._by_key[(intent, arity)]
        except KeyError:
            raise NoTemplate(f"no template for intent {intent!r} with arity {arity}") from None


def load_templates(path: Optional[str] = None) -> TemplateLibrary:
    path = path or DEFAULT_TEMPLATES
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        templates = [
            QueryTemplate(
                id=item["id"],
                intent=item["intent"],
                arity=int(item["arity"]),
                skeleton=item["skeleton"],
                slots=dict(item["slots"]),
            )
            for item in raw
        ]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"cannot read template library {path}: {e}") from e
    logger.debug("loaded %d templates from %s", len(templates), path)
    return TemplateLibrary(templates)
