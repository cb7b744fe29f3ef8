import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))
from multiKGQA.aggregator import DROP
from multiKGQA.errors import ConfigError
from multiKGQA.pipeline_config import FAIL_FAST, PipelineConfig, config_from_dict, load_config


def test_defaults():
    config = PipelineConfig()
    assert (config.weak_k, config.perturbations, config.retries) == (5, 3, 2)
    assert config.clarification == FAIL_FAST
    assert config.weights.strong == 0.5
    assert config.generation_defaults == {"max_length": 512, "beam_width": 1, "temperature": 0.0}
    assert config.ablations == []


@pytest.mark.parametrize(
    "kwargs",
    [
        {"weight_weak": 0.5},
        {"weight_utility": -0.2, "weight_strong": 0.9},
        {"weak_k": 0},
        {"perturbations": 0},
        {"parallelism": 0},
        {"retries": -1},
        {"clarification": "maybe"},
        {"conflict_policy": "vote"},
        {"token_ceiling": 0},
    ],
)
def test_invalid_settings(kwargs):
    with pytest.raises(ConfigError):
        PipelineConfig(**kwargs)


def test_ablate():
    config = PipelineConfig().ablate("verifier", "alignment")
    assert config.ablations == ["verifier", "alignment"]
    assert "verifier, alignment" in str(config)
    with pytest.raises(ConfigError):
        PipelineConfig().ablate("memory")


def test_config_from_dict_converts_strings():
    config = config_from_dict(
        {"weak-k": "3", "utility_feedback": "no", "token_ceiling": "none", "conflict_policy": DROP, "retries": 0}
    )
    assert config.weak_k == 3
    assert config.utility_feedback is False
    assert config.token_ceiling is None
    assert config.conflict_policy == DROP
    assert config.retries == 0


@pytest.mark.parametrize("values", [{"colour": "red"}, {"utility_feedback": "perhaps"}, {"weak_k": "many"}])
def test_config_from_dict_rejects(values):
    with pytest.raises(ConfigError):
        config_from_dict(values)


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("registry = graphs/registry.json\nperturbations = 5\nparallelism = 2\n")
    config = load_config(str(path), overrides={"parallelism": "8", "backend": None})
    assert config.registry == os.path.join(str(tmp_path), "graphs", "registry.json")
    assert config.perturbations == 5
    assert config.parallelism == 8
    assert config.backend == "rule"


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))
    path = tmp_path / "broken.cfg"
    path.write_text("no equals sign here\n")
    with pytest.raises(ConfigError):
        load_config(str(path))
