import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.fixtures import make_fixtures
from multiKGQA.pipeline_config import PipelineConfig
from multiKGQA.registry import load_registry


def pytest_configure(config):
    config.addinivalue_line("markers", "serial: slow end-to-end run over the whole corpus")


@pytest.fixture(scope="session")
def fixtures_dir(tmp_path_factory):
    """The synthetic graphs, registries and corpus, generated once per test session."""
    directory = tmp_path_factory.mktemp("fixtures")
    make_fixtures(str(directory), seed=0)
    return str(directory)


@pytest.fixture(scope="session")
def registry_path(fixtures_dir):
    return os.path.join(fixtures_dir, "registry.json")


@pytest.fixture(scope="session")
def faults_registry_path(fixtures_dir):
    return os.path.join(fixtures_dir, "registry_faults.json")


@pytest.fixture(scope="session")
def corpus_path(fixtures_dir):
    return os.path.join(fixtures_dir, "corpus.jsonl")


@pytest.fixture(scope="session")
def shared_registry(registry_path):
    """Read-only registry shared across tests; pipelines using it must not write utilities back."""
    return load_registry(registry_path)


@pytest.fixture
def registry(registry_path):
    return load_registry(registry_path)


@pytest.fixture
def config(registry_path, tmp_path):
    return PipelineConfig(registry=registry_path, output_root_dir=str(tmp_path), utility_feedback=False)
