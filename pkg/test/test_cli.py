import json
import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.cli import EXIT_CLARIFICATION, EXIT_OK, EXIT_PIPELINE, EXIT_REGISTRY, EXIT_USAGE, run_cli
from multiKGQA.fixtures import EU_PILOT, GRAPH_FILES, RICE_HS, WASTE_LEDGER
from multiKGQA.registry import load_registry
from multiKGQA.verifier import FAIL_SYMBOLIC, PASS

QUESTION = "For product code found in the resources, which trade codes co-occur with it?"


def _ask(registry_path, trace_path, *extra):
    return run_cli(["ask", "--registry", registry_path, "--question", QUESTION, "--trace", trace_path, *extra])


def test_ask_prints_answer_and_provenance(registry_path, tmp_path, capsys):
    trace_path = str(tmp_path / "trace.json")
    assert _ask(registry_path, trace_path, "--clarify", "CPA code 011150") == EXIT_OK
    out = capsys.readouterr().out
    assert RICE_HS in out
    assert f"provenance: {EU_PILOT}#1 -> {WASTE_LEDGER}#2" in out
    with open(trace_path, encoding="utf-8") as f:
        trace = json.load(f)
    assert trace["status"] == "answered"
    assert trace["total_tokens"] > 0


def test_ask_json(registry_path, tmp_path, capsys):
    assert _ask(registry_path, str(tmp_path / "trace.json"), "--clarify", "CPA code 011150", "--json") == EXIT_OK
    answer = json.loads(capsys.readouterr().out)
    (binding,) = answer["rows"]["results"]["bindings"]
    assert binding["v"]["value"] == RICE_HS
    assert answer["provenance"] == [[{"graph_id": EU_PILOT, "subgoal_id": 1}, {"graph_id": WASTE_LEDGER, "subgoal_id": 2}]]


def test_ask_needs_clarification(registry_path, tmp_path, capsys):
    trace_path = str(tmp_path / "trace.json")
    assert _ask(registry_path, trace_path) == EXIT_CLARIFICATION
    request = json.loads(capsys.readouterr().out)["clarification"]
    assert request["readings"] == ["CPA code", "waste classification code"]
    assert os.path.exists(trace_path)


def test_ask_with_a_missing_registry(tmp_path):
    assert _ask(str(tmp_path / "none.json"), str(tmp_path / "trace.json")) == EXIT_REGISTRY


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["guess"],
        ["ask"],
        ["bench", "--corpus", "c.jsonl", "--ablate", "memory"],
        ["validate", "--graph", "g"],
    ],
)
def test_usage_errors(argv):
    assert run_cli(argv) == EXIT_USAGE


def test_bad_configuration_is_a_usage_error(registry_path, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("colour = red\n")
    assert run_cli(["schema", "show", "--config", str(config), EU_PILOT]) == EXIT_USAGE


@pytest.mark.parametrize(
    "query, expected",
    [
        ('PREFIX eup: <http://example.org/eu-pilot/> SELECT ?m WHERE { ?m eup:cpaCode "011150" }', EXIT_OK),
        ("PREFIX eup: <http://example.org/eu-pilot/> SELECT ?m WHERE { ?m eup:cpaCodes ?c }", EXIT_PIPELINE),
    ],
)
def test_validate(registry_path, capsys, query, expected):
    assert run_cli(["validate", "--registry", registry_path, "--graph", EU_PILOT, "--query", query, "--json"]) == expected
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == (PASS if expected == EXIT_OK else FAIL_SYMBOLIC)


def test_registry_commands(fixtures_dir, tmp_path, capsys):
    manifest = str(tmp_path / "registry.json")
    graph = os.path.join(fixtures_dir, GRAPH_FILES[EU_PILOT])
    assert run_cli(["registry", "add", "--registry", manifest, "--graph-id", "pilot", "--path", graph]) == EXIT_OK
    assert run_cli(["registry", "add", "--registry", manifest, "--graph-id", "pilot", "--path", graph]) == EXIT_REGISTRY
    assert load_registry(manifest).graph_ids == ["pilot"]

    capsys.readouterr()
    assert run_cli(["registry", "list", "--registry", manifest, "--json"]) == EXIT_OK
    (listed,) = json.loads(capsys.readouterr().out)
    assert listed["graph_id"] == "pilot"

    assert run_cli(["registry", "show", "--registry", manifest, "pilot"]) == EXIT_OK
    assert "cpaCode" in capsys.readouterr().out
    assert run_cli(["registry", "remove", "--registry", manifest, "pilot"]) == EXIT_OK
    assert run_cli(["registry", "show", "--registry", manifest, "pilot"]) == EXIT_REGISTRY


def test_schema_show(registry_path, capsys):
    assert run_cli(["schema", "show", "--registry", registry_path, WASTE_LEDGER, "--json"]) == EXIT_OK
    slice = json.loads(capsys.readouterr().out)
    assert "http://example.org/waste-ledger/hsCode" in json.dumps(slice)


def test_fixtures_command(tmp_path, capsys):
    assert run_cli(["fixtures", "--output", str(tmp_path), "--seed", "0"]) == EXIT_OK
    assert os.path.exists(tmp_path / "corpus.jsonl")
    assert "registry" in capsys.readouterr().out


def test_bench_on_an_empty_corpus(registry_path, tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("")
    assert run_cli(["bench", "--registry", registry_path, "--corpus", str(corpus)]) == EXIT_PIPELINE
    assert run_cli(["bench", "--registry", registry_path, "--corpus", str(corpus), "--seeds", "a,b"]) == EXIT_USAGE
