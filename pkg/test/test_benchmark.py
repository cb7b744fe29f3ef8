import filecmp
import json
import os
import sys

import attr
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.ablation_configs import AblationConfigs
from multiKGQA.corpus import CROSS_KG, SINGLE_KG, BenchmarkItem, load_corpus
from multiKGQA.errors import ConfigError, CorpusError
from multiKGQA.fixtures import (
    CORPUS,
    EU_PILOT,
    GERMAN_IS,
    GRAPH_SIZE_BOUNDS,
    RICE_CPA,
    RICE_HS,
    WASTE_LEDGER,
    make_fixtures,
)
from multiKGQA.metric_values import FULL, MetricsReport, MetricSummary, MetricValues
from multiKGQA.pipeline_config import ABLATIONS, PipelineConfig
from multiKGQA.read_results import REPORT_FILE, ea_table, read_results
from multiKGQA.run_benchmark import run_bench, save_report


def test_fixtures_are_deterministic(tmp_path):
    first = make_fixtures(str(tmp_path / "first"), seed=0)
    second = make_fixtures(str(tmp_path / "second"), seed=0)
    assert set(first) == set(second)
    for name in first:
        assert filecmp.cmp(first[name], second[name], shallow=False), name


def test_fixture_graph_sizes(shared_registry):
    for graph_id in (GERMAN_IS, EU_PILOT, WASTE_LEDGER):
        size = len(shared_registry.get(graph_id).store)
        assert GRAPH_SIZE_BOUNDS[0] <= size <= GRAPH_SIZE_BOUNDS[1], graph_id


def test_corpus_shape(corpus_path):
    items = load_corpus(corpus_path)
    assert len(items) >= 100
    settings = {item.setting for item in items}
    assert settings == {SINGLE_KG, CROSS_KG}
    assert all(item.gold_query is not None for item in items if item.setting == SINGLE_KG)
    clarified = [item for item in items if item.clarification == f"CPA code {RICE_CPA}"]
    assert len(clarified) == 1
    (row,) = clarified[0].gold_rows()
    assert row["x"].value.endswith(RICE_CPA)
    assert row["v"].lexical == RICE_HS


@pytest.mark.parametrize(
    "lines",
    [
        [],
        ["not json"],
        [json.dumps({"id": "a", "question": "q?"})],
        [json.dumps({"id": "a", "question": "  ", "gold_query": "ASK { ?s ?p ?o }"})],
        [json.dumps({"id": "a", "question": "q?", "gold_query": "SELECT ?x WHERE {"})],
        [json.dumps({"id": "a", "question": "q?", "gold_answer": {"results": 3}})],
        [json.dumps({"id": "a", "question": "q?", "gold_answer": {"boolean": True}, "tags": [CROSS_KG]})],
        [json.dumps({"id": "a", "question": "q?", "gold_answer": {"boolean": True}})] * 2,
    ],
)
def test_bad_corpora(tmp_path, lines):
    path = tmp_path / CORPUS
    path.write_text("".join(line + "\n" for line in lines))
    with pytest.raises(CorpusError):
        load_corpus(str(path))


def test_corpus_error_names_the_item():
    with pytest.raises(CorpusError) as info:
        BenchmarkItem(id="x-001", question="q?").validate()
    assert info.value.item_id == "x-001"
    assert "x-001" in str(info.value)


def test_ablation_configs():
    assert AblationConfigs.for_switch("verifier").name == "w/o verifier"
    config = AblationConfigs.WITHOUT_ALLOCATOR.apply(PipelineConfig())
    assert config.ablations == ["allocator"]
    assert AblationConfigs.FULL.apply(PipelineConfig()).ablations == []
    with pytest.raises(ConfigError):
        AblationConfigs.for_switch("memory")


def test_empty_corpus(tmp_path, config):
    path = tmp_path / CORPUS
    path.write_text("")
    with pytest.raises(CorpusError):
        run_bench(str(path), config)


@pytest.mark.serial
def test_full_pipeline_solves_the_corpus(corpus_path, config, tmp_path):
    report_path = str(tmp_path / "full" / REPORT_FILE)
    report = run_bench(corpus_path, config, seeds=[0, 1, 2], report_path=report_path)
    assert report.ea == 100.0
    assert report.qsc == 100.0
    assert report.tf1 == 100.0
    assert report.headline.deviations() == [0.0, 0.0, 0.0, 0.0]
    assert report.footer is not None

    records = [r for r in report.records if r.exp_number == 0]
    assert report.atu == pytest.approx(sum(r.tokens for r in records) / len(records))
    assert all(r.tokens > 0 for r in records)

    with open(report_path, encoding="utf-8") as f:
        saved = json.load(f)
    assert saved["ea"] == 100.0
    assert len(saved["records"]) == 3 * len(load_corpus(corpus_path))
    assert os.path.exists(str(tmp_path / "full" / "report-records.csv"))

    table = ea_table(read_results(str(tmp_path)))
    assert (table.loc[("full", FULL)] == 100.0).all()


@pytest.mark.serial
def test_every_ablation_loses_accuracy_on_faulty_graphs(corpus_path, faults_registry_path, config):
    report = run_bench(corpus_path, attr.evolve(config, registry=faults_registry_path), ablations=list(ABLATIONS))
    full = report.configurations[FULL]
    for ablation in (
        AblationConfigs.WITHOUT_VERIFIER,
        AblationConfigs.WITHOUT_ALLOCATOR,
        AblationConfigs.WITHOUT_DECOMPOSER,
    ):
        assert report.configurations[ablation.name].ea < full.ea, ablation.name


def test_save_report_round_trip(tmp_path):
    report = MetricsReport(
        seeds=[0],
        configurations={FULL: MetricSummary(ea=50.0, qsc=100.0, atu=12.0)},
        records=[
            MetricValues("a", FULL, SINGLE_KG, 0, ea=1, qsc=1, tokens=12),
            MetricValues("b", FULL, CROSS_KG, 0, ea=0, qsc=1, tokens=12),
        ],
    )
    save_report(report, str(tmp_path / "run" / REPORT_FILE))
    results = read_results(str(tmp_path))
    assert list(results["item_id"]) == ["a", "b"]
    table = ea_table(results)
    assert table.loc[("run", FULL), SINGLE_KG] == 100.0
    assert table.loc[("run", FULL), CROSS_KG] == 0.0
