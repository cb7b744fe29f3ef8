"""Question decomposition into ordered subgoals.

The rule engine works in three passes: interrogative-head patterns pick the
intent of each clause, the domain lexicon finds entity/predicate/class
mentions, and anchor or conjunction splitting turns one question into a
multi-step plan. Ambiguous mentions and clauses without an intent become a
:class:`ClarificationRequest` instead of a plan.
"""
import json
import logging
import re
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import attr
from attr import Factory, dataclass

from multiKGQA.backend import build_prompt, prompt_section
from multiKGQA.errors import ClarificationLoopExceeded, EmptyQuestion
from multiKGQA.lexicon import Lexicon, LexiconEntry, load_lexicon
from multiKGQA.text import stem

logger = logging.getLogger(__name__)

ENTITY_LOOKUP = "EntityLookup"
CONDITION_FILTER = "ConditionFilter"
AGGREGATION = "Aggregation"
COMPARISON = "Comparison"
CO_OCCURRENCE = "CoOccurrence"
INTENTS = (ENTITY_LOOKUP, CONDITION_FILTER, AGGREGATION, COMPARISON, CO_OCCURRENCE)

UNDERSPECIFIED_ENTITY = "UnderspecifiedEntity"
AMBIGUOUS_INTENT = "AmbiguousIntent"
MISSING_CONSTRAINT = "MissingConstraint"
AMBIGUITY_KINDS = (UNDERSPECIFIED_ENTITY, AMBIGUOUS_INTENT, MISSING_CONSTRAINT)

MAX_CLARIFICATION_ROUNDS = 3


@dataclass
class Subgoal:
    id: int
    intent: str
    entity_mentions: List[str] = Factory(list)
    predicate_mentions: List[str] = Factory(list)
    literal_constraints: List[Tuple[str, str]] = Factory(list)
    depends_on: Optional[int] = None
    # the subset of predicate mentions that name classes
    class_mentions: List[str] = Factory(list)

    @property
    def relation_mentions(self) -> List[str]:
        return [m for m in self.predicate_mentions if m not in self.class_mentions]

    @property
    def filter_constraints(self) -> List[Tuple[str, str]]:
        return [(value, op) for value, op in self.literal_constraints if op != "="]

    def entity_parts(self, mention: str) -> Tuple[Optional[str], Optional[str]]:
        """Splits ``CPA code 011150`` into the scheme ``CPA code`` and the value ``011150``."""
        for value, op in self.literal_constraints:
            if op != "=":
                continue
            for written in (f'"{value}"', value):
                if mention.endswith(written) and len(mention) > len(written):
                    return mention[: -len(written)].strip(), value
        return None, None

    def mention_text(self) -> str:
        return " ".join(self.entity_mentions + self.predicate_mentions)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "intent": self.intent,
            "entity_mentions": list(self.entity_mentions),
            "predicate_mentions": list(self.predicate_mentions),
            "class_mentions": list(self.class_mentions),
            "literal_constraints": [list(c) for c in self.literal_constraints],
            "depends_on": self.depends_on,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Subgoal":
        return cls(
            id=int(obj["id"]),
            intent=obj["intent"],
            entity_mentions=list(obj.get("entity_mentions", [])),
            predicate_mentions=list(obj.get("predicate_mentions", [])),
            literal_constraints=[(str(v), str(op)) for v, op in obj.get("literal_constraints", [])],
            depends_on=obj.get("depends_on"),
            class_mentions=list(obj.get("class_mentions", [])),
        )


@dataclass(frozen=True)
class ClarificationRequest:
    question: str
    kind: str
    readings: Tuple[str, ...]
    # the text that was decomposed and the mention that triggered the request
    source: str = ""
    mention: Optional[str] = None
    rounds: int = 1

    def __attrs_post_init__(self):
        if self.kind not in AMBIGUITY_KINDS:
            raise ValueError(f"unknown ambiguity kind {self.kind!r}")
        if not self.readings:
            raise ValueError("a clarification request needs at least one reading")

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "kind": self.kind,
            "readings": list(self.readings),
            "source": self.source,
            "mention": self.mention,
            "rounds": self.rounds,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClarificationRequest":
        return cls(
            question=obj["question"],
            kind=obj["kind"],
            readings=tuple(obj["readings"]),
            source=obj.get("source", ""),
            mention=obj.get("mention"),
            rounds=int(obj.get("rounds", 1)),
        )


Plan = Union[List[Subgoal], ClarificationRequest]


def validate_plan(subgoals: List[Subgoal]) -> List[Subgoal]:
    if not subgoals:
        raise ValueError("a plan needs at least one subgoal")
    for position, subgoal in enumerate(subgoals, start=1):
        if subgoal.id != position:
            raise ValueError(f"subgoal ids must run 1..n, found {subgoal.id} at {position}")
        if subgoal.intent not in INTENTS:
            raise ValueError(f"unknown intent {subgoal.intent!r}")
        if not subgoal.entity_mentions and not subgoal.predicate_mentions:
            raise ValueError(f"subgoal {subgoal.id} has no mentions")
        if subgoal.depends_on is not None and not 1 <= subgoal.depends_on < subgoal.id:
            raise ValueError(f"subgoal {subgoal.id} depends on {subgoal.depends_on}")
        if not set(subgoal.class_mentions) <= set(subgoal.predicate_mentions):
            raise ValueError(f"subgoal {subgoal.id} has class mentions outside its predicate mentions")
    return subgoals


def plan_to_json(plan: Plan) -> dict:
    if isinstance(plan, ClarificationRequest):
        return {"clarification": plan.to_json()}
    return {"subgoals": [subgoal.to_json() for subgoal in plan]}


def plan_from_json(obj: dict) -> Plan:
    if "clarification" in obj:
        return ClarificationRequest.from_json(obj["clarification"])
    return validate_plan([Subgoal.from_json(item) for item in obj["subgoals"]])


# rule engine

_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|[A-Za-z0-9](?:[A-Za-z0-9.\-]*[A-Za-z0-9])?|\S')

_HOW_MANY = re.compile(r"\bhow\s+many\b", re.I)
_CO_OCCUR = re.compile(r"\bco-?occur", re.I)
_COMPARISON = re.compile(r"^\s*compare\b|\bmore\s+(?!than\b)\w+(?:\s+\w+)*?\s+than\b", re.I)
_LOOKUP_HEAD = re.compile(r"^\s*(which|what|who|list|show|give|find|name)\b", re.I)
_CUE = re.compile(
    r"\b(greater than|more than|higher than|above|over|at least|less than|fewer than|"
    r"lower than|below|under|at most)\s+(-?\d+(?:\.\d+)?)\b",
    re.I,
)
_DANGLING_CUE = re.compile(r"\b(greater than|less than|at least|at most|fewer than|lower than)\b", re.I)
_CUE_OPERATORS = {
    "greater than": ">",
    "more than": ">",
    "higher than": ">",
    "above": ">",
    "over": ">",
    "at least": ">=",
    "less than": "<",
    "fewer than": "<",
    "lower than": "<",
    "below": "<",
    "under": "<",
    "at most": "<=",
}

_FOR_ANCHOR = re.compile(r"^\s*for\s+(?P<anchor>.+?),\s*(?P<main>.+)$", re.I | re.S)
_CO_OCCUR_WITH = re.compile(r"\bco-?occurs?\s+with\s+(?P<anchor>.+?)\s*[?.!]*\s*$", re.I)
_PROVENANCE = re.compile(r"\s+(found|located|listed)\s+in\b", re.I)
_PRONOUN = re.compile(r"\b(it|them|those|these)\b", re.I)
_CONJUNCTION = re.compile(r",?\s+and\s+(?=(which|what|how many|who|list)\b)", re.I)
_HEAD_WORDS = {"for", "which", "what", "who", "how", "list", "show", "give", "find", "name", "compare"}


@dataclass(frozen=True)
class _Token:
    text: str
    start: int
    end: int

    @property
    def is_word(self) -> bool:
        return self.text[0].isalnum()

    @property
    def is_quoted(self) -> bool:
        return self.text.startswith('"')


@dataclass(frozen=True)
class _Mention:
    text: str
    kind: str
    entries: Tuple[LexiconEntry, ...]
    start: int
    end: int
    value: Optional[str] = None
    value_end: Optional[int] = None

    @property
    def ambiguous(self) -> bool:
        return len({entry.target for entry in self.entries}) >= 2

    def entity_text(self, question: str) -> str:
        return question[self.start : self.value_end]


@dataclass(frozen=True)
class _Clause:
    start: int
    end: int
    intent: Optional[str] = None
    depends: bool = False


class RuleEngine:
    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    def decompose(self, question: str) -> Plan:
        text = question.strip()
        if not text:
            raise EmptyQuestion("the question is empty")
        for mention in self._mentions(text, 0, len(text)):
            if mention.ambiguous:
                readings = sorted({entry.display for entry in mention.entries})
                return ClarificationRequest(
                    question=f"Which {mention.text} do you mean: {' or '.join(readings)}? "
                    "Please name the code scheme and, if known, the code value.",
                    kind=UNDERSPECIFIED_ENTITY,
                    readings=tuple(readings),
                    source=text,
                    mention=mention.text,
                )
        subgoals = []
        for clause in self._clauses(text):
            result = self._subgoal(text, clause, len(subgoals) + 1)
            if isinstance(result, ClarificationRequest):
                return result
            subgoals.append(result)
        return validate_plan(subgoals)

    def single_subgoal(self, question: str) -> List[Subgoal]:
        """The whole question as one subgoal, with no splitting and no clarification."""
        text = question.strip()
        if not text:
            raise EmptyQuestion("the question is empty")
        intent = self._intent(text) or ENTITY_LOOKUP
        subgoal = self._subgoal(text, _Clause(0, len(text), intent), 1, allow_clarification=False)
        return [subgoal]

    # mentions

    def _tokens(self, text: str, start: int, end: int) -> List[_Token]:
        return [
            _Token(match.group(0), match.start() + start, match.end() + start)
            for match in _TOKEN.finditer(text[start:end])
        ]

    def _mentions(self, text: str, start: int, end: int) -> List[_Mention]:
        tokens = self._tokens(text, start, end)
        mentions = []
        i = 0
        while i < len(tokens):
            found = None
            if tokens[i].is_word:
                for size in range(min(self.lexicon.max_words, len(tokens) - i), 0, -1):
                    window = tokens[i : i + size]
                    if not all(token.is_word for token in window):
                        continue
                    entries = self.lexicon.lookup(tuple(stem(token.text) for token in window))
                    if entries:
                        found = (size, entries)
                        break
            if found is None:
                i += 1
                continue
            size, entries = found
            first, last = tokens[i], tokens[i + size - 1]
            kind = entries[0].kind
            value = value_end = None
            after = i + size
            if kind == "predicate" and after < len(tokens) and self._is_value(tokens, after):
                token = tokens[after]
                value = token.text[1:-1] if token.is_quoted else token.text
                value_end = token.end
                after += 1
            mentions.append(
                _Mention(
                    text=text[first.start : last.end],
                    kind=kind,
                    entries=tuple(entries),
                    start=first.start,
                    end=last.end,
                    value=value,
                    value_end=value_end,
                )
            )
            i = after
        return mentions

    def _is_value(self, tokens: List[_Token], index: int) -> bool:
        token = tokens[index]
        if token.is_quoted:
            return True
        if not token.is_word:
            return False
        if any(ch.isdigit() for ch in token.text):
            return True
        if not token.text[0].isupper() or token.text.lower() in _HEAD_WORDS:
            return False
        return not self.lexicon.lookup((stem(token.text),))

    # clauses

    def _clauses(self, text: str) -> List[_Clause]:
        anchored = _FOR_ANCHOR.match(text)
        if anchored:
            anchor_start, anchor_end = anchored.span("anchor")
            provenance = _PROVENANCE.search(text, anchor_start, anchor_end)
            if provenance:
                anchor_end = provenance.start()
            main_start, main_end = anchored.span("main")
            return [
                _Clause(anchor_start, anchor_end, ENTITY_LOOKUP),
                _Clause(main_start, main_end, None, depends=True),
            ]

        co_occur = _CO_OCCUR_WITH.search(text)
        if co_occur:
            anchor_start, anchor_end = co_occur.span("anchor")
            anchor = text[anchor_start:anchor_end]
            mentions = self._mentions(text, anchor_start, anchor_end)
            standalone = _PRONOUN.fullmatch(anchor.strip()) or (
                len(mentions) == 1 and mentions[0].kind == "entity"
            )
            if not standalone:
                return [
                    _Clause(anchor_start, anchor_end, ENTITY_LOOKUP),
                    _Clause(0, co_occur.start(), CO_OCCURRENCE, depends=True),
                ]
            return [_Clause(0, len(text), CO_OCCURRENCE)]

        clauses = []
        position = 0
        for split in _CONJUNCTION.finditer(text):
            clauses.append((position, split.start()))
            position = split.end()
        clauses.append((position, len(text)))
        return [
            _Clause(start, end, None, depends=index > 0 and bool(_PRONOUN.search(text, start, end)))
            for index, (start, end) in enumerate(clauses)
        ]

    def _intent(self, clause: str) -> Optional[str]:
        if _HOW_MANY.search(clause):
            return AGGREGATION
        if _CO_OCCUR.search(clause):
            return CO_OCCURRENCE
        if _COMPARISON.search(clause):
            return COMPARISON
        if _CUE.search(clause):
            return CONDITION_FILTER
        if _LOOKUP_HEAD.search(clause):
            return ENTITY_LOOKUP
        return None

    def _subgoal(
        self, text: str, clause: _Clause, subgoal_id: int, allow_clarification: bool = True
    ) -> Union[Subgoal, ClarificationRequest]:
        span = text[clause.start : clause.end]
        intent = clause.intent or self._intent(span)
        if intent is None:
            core = span.strip().rstrip("?.!").strip()
            return ClarificationRequest(
                question=f"Do you want the matching items listed or counted for '{core}'?",
                kind=AMBIGUOUS_INTENT,
                readings=(f"Which {core}?", f"How many {core}?"),
                source=text,
            )

        entity_mentions, predicate_mentions, class_mentions, constraints = [], [], [], []
        for mention in self._mentions(text, clause.start, clause.end):
            if mention.kind == "class":
                predicate_mentions.append(mention.text)
                class_mentions.append(mention.text)
            elif mention.kind == "entity":
                entity_mentions.append(mention.text)
            elif mention.value is not None:
                entity_mentions.append(mention.entity_text(text))
                constraints.append((mention.value, "="))
            else:
                predicate_mentions.append(mention.text)
        cues = list(_CUE.finditer(span))
        for cue in cues:
            constraints.append((cue.group(2), _CUE_OPERATORS[cue.group(1).lower()]))

        if allow_clarification and not cues and _DANGLING_CUE.search(span):
            return ClarificationRequest(
                question="Which value should the comparison use?",
                kind=MISSING_CONSTRAINT,
                readings=tuple(f"{cue} <number>" for cue in ("greater than", "less than")),
                source=text,
                mention=_DANGLING_CUE.search(span).group(0),
            )
        if allow_clarification and not entity_mentions and not predicate_mentions:
            surfaces = sorted({entry.display for entry in self.lexicon.entries if entry.kind != "entity"})
            return ClarificationRequest(
                question="Which kind of record or attribute is the question about?",
                kind=MISSING_CONSTRAINT,
                readings=tuple(surfaces[:5]) or ("a record type",),
                source=text,
            )
        return Subgoal(
            id=subgoal_id,
            intent=intent,
            entity_mentions=entity_mentions,
            predicate_mentions=predicate_mentions,
            literal_constraints=constraints,
            depends_on=subgoal_id - 1 if clause.depends and subgoal_id > 1 else None,
            class_mentions=class_mentions,
        )


@lru_cache(maxsize=4)
def _default_lexicon(path: Optional[str] = None) -> Lexicon:
    return load_lexicon(path)


def decompose(question: str, lexicon: Optional[Lexicon] = None) -> Plan:
    return RuleEngine(lexicon or _default_lexicon()).decompose(question)


def reformulate(original: str, request: ClarificationRequest, answer: str) -> str:
    answer = answer.strip()
    if request.kind == UNDERSPECIFIED_ENTITY and request.mention:
        pattern = re.compile(re.escape(request.mention), re.I)
        if pattern.search(original):
            return pattern.sub(lambda _: answer, original, count=1)
    if request.kind == AMBIGUOUS_INTENT and (_LOOKUP_HEAD.search(answer) or _HOW_MANY.search(answer)):
        return answer
    body = original.strip().rstrip("?.!")
    return f"{body} {answer}?"


def apply_clarification(
    original: str, answer: str, rounds: int = 1, lexicon: Optional[Lexicon] = None
) -> Plan:
    """Reformulates ``original`` with the user's answer and decomposes again.

    ``rounds`` is the round of the request being answered. An empty answer keeps
    the request open; a fourth round raises ClarificationLoopExceeded.
    """
    engine = RuleEngine(lexicon or _default_lexicon())
    request = engine.decompose(original)
    if not isinstance(request, ClarificationRequest):
        return request
    if answer.strip():
        result = engine.decompose(reformulate(original, request, answer))
        if not isinstance(result, ClarificationRequest):
            return result
    else:
        result = request
    if rounds + 1 > MAX_CLARIFICATION_ROUNDS:
        raise ClarificationLoopExceeded(
            f"still ambiguous after {MAX_CLARIFICATION_ROUNDS} clarification rounds: {original!r}"
        )
    return attr.evolve(result, rounds=rounds + 1)


def rule_handler(lexicon: Lexicon):
    """The decompose role of the rule backend: question section in, plan JSON out."""
    engine = RuleEngine(lexicon)

    def handle(prompt: str) -> str:
        return json.dumps(plan_to_json(engine.decompose(prompt_section(prompt, "question"))))

    return handle


class SubgoalParser:
    """Decomposes through the backend and falls back to the rule engine on malformed output."""

    def __init__(self, lexicon: Lexicon, backend=None):
        self.lexicon = lexicon
        self.engine = RuleEngine(lexicon)
        self.backend = backend

    def decompose(self, question: str) -> Plan:
        if not question.strip():
            raise EmptyQuestion("the question is empty")
        if self.backend is None:
            return self.engine.decompose(question)
        prompt = build_prompt(
            "Split the question into subgoals and answer with the plan as JSON.",
            question=question.strip(),
        )
        response = self.backend.request("decompose", prompt)
        try:
            return plan_from_json(json.loads(response.text))
        except (ValueError, KeyError, TypeError) as e:
            logger.warning("rejected plan from backend %s: %s", response.backend_id, e)
            return self.engine.decompose(question)

    def clarify(self, original: str, answer: str, rounds: int) -> Plan:
        return apply_clarification(original, answer, rounds, self.lexicon)

    def single_subgoal(self, question: str) -> List[Subgoal]:
        return self.engine.single_subgoal(question)