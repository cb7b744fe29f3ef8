"""Text generation backends.

``RuleBackend`` is the deterministic default: a pure function of
(role, prompt) built from per-role handlers. ``HttpBackend`` talks JSON to
a remote model server. Token counts always come from :func:`count_tokens`
when a backend reports none, so usage numbers are comparable only within
this package.
"""
import logging
import os
import re
import threading
from abc import abstractmethod
from typing import Callable, Dict, List, Optional

import requests
from attr import Factory, dataclass

from multiKGQA.errors import BackendUnavailable, BudgetExceeded

logger = logging.getLogger(__name__)

ROLES = ("decompose", "clarify", "synthesize", "summarize")

_TOKEN = re.compile(r"[?$]?\w+|[^\w\s]")


def count_tokens(text: str) -> int:
    """Whitespace split, then every punctuation character is its own token.

    A ``?`` or ``$`` sigil stays attached to the variable name it starts.
    """
    return sum(len(_TOKEN.findall(chunk)) for chunk in text.split())


@dataclass(frozen=True)
class GenerationRequest:
    role: str
    prompt: str
    max_length: int = 512  # L
    beam_width: int = 1  # B
    temperature: float = 0.0

    def __attrs_post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.prompt.strip():
            raise ValueError("prompt must not be empty")
        if self.beam_width < 1:
            raise ValueError("beam width must be at least 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    backend_id: str
    role: str = ""
    refused: bool = False

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass
class TokenBudget:
    ceiling: Optional[int] = None
    used: int = 0
    _lock: threading.Lock = Factory(threading.Lock)

    def charge(self, tokens: int):
        with self._lock:
            if self.ceiling is not None and self.used + tokens > self.ceiling:
                raise BudgetExceeded(
                    f"{self.used} + {tokens} tokens exceeds the ceiling of {self.ceiling}"
                )
            self.used += tokens


class Backend:
    name = "base"

    def __init__(self, budget: Optional[TokenBudget] = None):
        self.budget = budget or TokenBudget()

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        prompt_tokens = count_tokens(request.prompt)
        self.budget.charge(prompt_tokens)
        text, reported_prompt, completion = self._generate(request)
        if not text.strip():
            text, refused = "I cannot answer this request.", True
        else:
            refused = False
        completion_tokens = completion if completion is not None else count_tokens(text)
        self.budget.charge(completion_tokens)
        return GenerationResponse(
            text=text,
            prompt_tokens=reported_prompt if reported_prompt is not None else prompt_tokens,
            completion_tokens=completion_tokens,
            backend_id=self.name,
            role=request.role,
            refused=refused,
        )

    @abstractmethod
    def _generate(self, request: GenerationRequest):
        """Returns (text, prompt tokens or None, completion tokens or None)."""


# prompt layout shared by the callers and the rule handlers

SECTION = re.compile(r"^(?P<name>[A-Za-z ]+):\s?(?P<body>.*)$")


def build_prompt(instruction: str, **sections: str) -> str:
    lines = [instruction]
    for name, body in sections.items():
        lines.append(f"{name.capitalize()}: {body}")
    return "\n".join(lines)


def prompt_section(prompt: str, name: str) -> str:
    """Everything after ``Name:`` up to the next section header."""
    collected, inside = [], False
    for line in prompt.splitlines():
        match = SECTION.match(line)
        if match and match.group("name").strip().lower() == name.lower():
            inside = True
            collected.append(match.group("body"))
        elif inside and match and match.group("name").strip().lower() in _SECTION_NAMES:
            break
        elif inside:
            collected.append(line)
    return "\n".join(collected).strip()


_SECTION_NAMES = {"question", "draft", "facts", "readings", "schema"}


def _echo_draft(prompt: str) -> str:
    return prompt_section(prompt, "draft")


def _join_facts(prompt: str) -> str:
    facts = [line.strip() for line in prompt_section(prompt, "facts").splitlines() if line.strip()]
    return "; ".join(facts)


def _clarify(prompt: str) -> str:
    return prompt_section(prompt, "question")


DEFAULT_RULE_HANDLERS: Dict[str, Callable[[str], str]] = {
    "synthesize": _echo_draft,
    "summarize": _join_facts,
    "clarify": _clarify,
}


class RuleBackend(Backend):
    name = "rule"

    def __init__(
        self,
        handlers: Optional[Dict[str, Callable[[str], str]]] = None,
        budget: Optional[TokenBudget] = None,
    ):
        super().__init__(budget)
        self.handlers = dict(DEFAULT_RULE_HANDLERS)
        self.handlers.update(handlers or {})

    def _generate(self, request: GenerationRequest):
        handler = self.handlers.get(request.role)
        if handler is None:
            raise BackendUnavailable(f"no rule handler for role {request.role!r}")
        return handler(request.prompt), None, None


class HttpBackend(Backend):
    """JSON over HTTP: ``{model, role, prompt, max_tokens, beam_width, temperature}`` in,
    ``{text, usage: {prompt_tokens, completion_tokens}}`` out."""

    name = "http"
    attempts = 3

    def __init__(
        self,
        url: str,
        model: str,
        api_key_env: Optional[str] = None,
        timeout: float = 60.0,
        budget: Optional[TokenBudget] = None,
    ):
        super().__init__(budget)
        self.url = url
        self.model = model
        self.timeout = timeout
        self._session = requests.Session()
        if api_key_env and os.environ.get(api_key_env):
            self._session.headers.update({"Authorization": f"Bearer {os.environ[api_key_env]}"})

    def _generate(self, request: GenerationRequest):
        body = {
            "model": self.model,
            "role": request.role,
            "prompt": request.prompt,
            "max_tokens": request.max_length,
            "beam_width": request.beam_width,
            "temperature": request.temperature,
        }
        last_error = None
        for attempt in range(1, self.attempts + 1):
            try:
                response = self._session.post(self.url, json=body, timeout=self.timeout)
                response.raise_for_status()
                payload = response.json()
                usage = payload.get("usage") or {}
                return (
                    str(payload.get("text", "")),
                    usage.get("prompt_tokens"),
                    usage.get("completion_tokens"),
                )
            except (requests.RequestException, ValueError) as e:
                last_error = e
                logger.warning("backend %s attempt %d/%d failed: %s", self.url, attempt, self.attempts, e)
        raise BackendUnavailable(f"{self.url}: {last_error}")


class AccountingBackend:
    """Wraps a backend and keeps every response of one question for usage accounting."""

    def __init__(self, backend: Backend, defaults: Optional[dict] = None):
        self.backend = backend
        self.defaults = defaults or {}
        self.responses: List[GenerationResponse] = []
        self._lock = threading.Lock()

    @property
    def name(self) -> str:
        return self.backend.name

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        response = self.backend.generate(request)
        with self._lock:
            self.responses.append(response)
        return response

    def request(self, role: str, prompt: str) -> GenerationResponse:
        return self.generate(GenerationRequest(role=role, prompt=prompt, **self.defaults))

    @property
    def total_tokens(self) -> int:
        return sum(response.total_tokens for response in self.responses)


def make_backend(
    kind: str,
    url: Optional[str] = None,
    model: Optional[str] = None,
    api_key_env: Optional[str] = None,
    token_ceiling: Optional[int] = None,
    handlers: Optional[Dict[str, Callable[[str], str]]] = None,
) -> Backend:
    budget = TokenBudget(ceiling=token_ceiling)
    if kind == "rule":
        return RuleBackend(handlers, budget=budget)
    if kind == "http":
        if not url:
            raise BackendUnavailable("backend.url is required for the http backend")
        return HttpBackend(url, model or "default", api_key_env, budget=budget)
    raise BackendUnavailable(f"unknown backend kind {kind!r}")

