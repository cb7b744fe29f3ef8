import os
import sys

import pytest
import requests

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.backend import (
    AccountingBackend,
    GenerationRequest,
    HttpBackend,
    RuleBackend,
    TokenBudget,
    build_prompt,
    count_tokens,
    make_backend,
    prompt_section,
)
from multiKGQA.errors import BackendUnavailable, BudgetExceeded


@pytest.mark.parametrize(
    "text, expected",
    [
        ("", 0),
        ("   ", 0),
        ("rice", 1),
        ("CPA code 011150?", 4),
        ("?x,?y", 3),
    ],
)
def test_count_tokens(text, expected):
    assert count_tokens(text) == expected


def test_count_tokens_keeps_sigils_on_variables_and_splits_other_punctuation():
    assert count_tokens("SELECT ?x WHERE { ?x a ex:Actor }") == 10
    assert count_tokens("?x") == count_tokens("$x") == 1
    assert count_tokens("ex:Actor") == 3
    assert count_tokens("{}") == 2


@pytest.mark.parametrize(
    "kwargs",
    [
        {"role": "guess", "prompt": "x"},
        {"role": "synthesize", "prompt": "  "},
        {"role": "synthesize", "prompt": "x", "beam_width": 0},
        {"role": "synthesize", "prompt": "x", "temperature": -0.1},
    ],
)
def test_invalid_requests(kwargs):
    with pytest.raises(ValueError):
        GenerationRequest(**kwargs)


def test_request_defaults():
    request = GenerationRequest(role="summarize", prompt="Facts: a")
    assert (request.beam_width, request.max_length, request.temperature) == (1, 512, 0.0)


def test_rule_backend_is_deterministic():
    backend = RuleBackend()
    prompt = build_prompt("Rewrite the draft.", draft="SELECT ?x WHERE { ?x ?p ?o }", schema="none")
    first = backend.generate(GenerationRequest(role="synthesize", prompt=prompt))
    second = backend.generate(GenerationRequest(role="synthesize", prompt=prompt))
    assert first == second
    assert first.text == "SELECT ?x WHERE { ?x ?p ?o }"
    assert first.prompt_tokens == count_tokens(prompt)
    assert first.completion_tokens == count_tokens(first.text)
    assert not first.refused


def test_prompt_sections():
    prompt = build_prompt("Summarize.", question="Which codes?", facts="a = 1\nb = 2")
    assert prompt_section(prompt, "question") == "Which codes?"
    assert prompt_section(prompt, "facts") == "a = 1\nb = 2"
    assert prompt_section(prompt, "draft") == ""
    response = RuleBackend().generate(GenerationRequest(role="summarize", prompt=prompt))
    assert response.text == "a = 1; b = 2"


def test_empty_output_is_a_refusal():
    backend = RuleBackend({"summarize": lambda prompt: ""})
    response = backend.generate(GenerationRequest(role="summarize", prompt="Facts:"))
    assert response.refused
    assert response.text == "I cannot answer this request."


def test_missing_handler():
    with pytest.raises(BackendUnavailable):
        RuleBackend().generate(GenerationRequest(role="decompose", prompt="Question: x"))


def test_budget_ceiling():
    budget = TokenBudget(ceiling=5)
    budget.charge(3)
    with pytest.raises(BudgetExceeded):
        budget.charge(3)
    assert budget.used == 3
    backend = RuleBackend(budget=TokenBudget(ceiling=2))
    with pytest.raises(BudgetExceeded):
        backend.generate(GenerationRequest(role="clarify", prompt="Question: which product code"))


def test_accounting_totals_equal_sum_of_calls():
    accounting = AccountingBackend(RuleBackend(), defaults={"beam_width": 2})
    responses = [
        accounting.request("clarify", build_prompt("Ask.", question="Which product code?")),
        accounting.request("summarize", build_prompt("Summarize.", facts="x")),
    ]
    assert accounting.total_tokens == sum(r.prompt_tokens + r.completion_tokens for r in responses)
    assert accounting.name == "rule"


class _Response:
    def __init__(self, status, payload):
        self.status_code = status
        self._payload = payload

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(f"HTTP {self.status_code}")

    def json(self):
        return self._payload


class _Session:
    def __init__(self, responses):
        self.responses = list(responses)
        self.bodies = []
        self.headers = {}

    def post(self, url, json=None, timeout=None):
        self.bodies.append(json)
        return self.responses.pop(0)


def test_http_backend_uses_reported_usage():
    backend = HttpBackend("http://model.example.org/v1", "tiny")
    backend._session = _Session(
        [_Response(500, None), _Response(200, {"text": "ok", "usage": {"prompt_tokens": 7, "completion_tokens": 2}})]
    )
    response = backend.generate(GenerationRequest(role="summarize", prompt="Facts: x", beam_width=3))
    assert (response.text, response.prompt_tokens, response.completion_tokens) == ("ok", 7, 2)
    assert backend._session.bodies[0]["beam_width"] == 3
    assert backend._session.bodies[0]["model"] == "tiny"


def test_http_backend_gives_up_after_three_attempts():
    backend = HttpBackend("http://model.example.org/v1", "tiny")
    backend._session = _Session([_Response(503, None)] * 3)
    with pytest.raises(BackendUnavailable):
        backend.generate(GenerationRequest(role="summarize", prompt="Facts: x"))
    assert len(backend._session.bodies) == 3


def test_make_backend():
    assert isinstance(make_backend("rule"), RuleBackend)
    assert isinstance(make_backend("http", url="http://model.example.org/v1"), HttpBackend)
    with pytest.raises(BackendUnavailable):
        make_backend("http")
    with pytest.raises(BackendUnavailable):
        make_backend("oracle")
