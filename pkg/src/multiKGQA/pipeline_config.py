import configparser
import os
from typing import Optional

import attr
from attr import dataclass

from multiKGQA.aggregator import DROP, KEEP
from multiKGQA.allocator import AllocationWeights
from multiKGQA.errors import ConfigError
from multiKGQA.synthesizer import FAN_OUT_CAP
from multiKGQA.verifier import DEFAULT_PERTURBATIONS

INTERACTIVE = "interactive"
FAIL_FAST = "fail-fast"

ABLATIONS = ("decomposer", "allocator", "verifier", "alignment")

_SECTION = "pipeline"


@dataclass
class PipelineConfig:
    registry: str = os.path.join("fixtures", "registry.json")

    backend: str = "rule"
    backend_url: Optional[str] = None
    backend_model: Optional[str] = None
    api_key_env: str = "MULTIKGQA_API_KEY"
    token_ceiling: Optional[int] = None
    max_length: int = 512
    beam_width: int = 1
    temperature: float = 0.0

    lexicon: Optional[str] = None
    templates: Optional[str] = None

    weak_k: int = 5
    weight_weak: float = 0.3
    weight_strong: float = 0.5
    weight_utility: float = 0.2
    perturbations: int = DEFAULT_PERTURBATIONS  # m
    fan_out_cap: int = FAN_OUT_CAP
    retries: int = 2
    timeout: float = 30.0

    clarification: str = FAIL_FAST
    parallelism: int = 4
    utility_feedback: bool = True
    conflict_policy: str = KEEP

    disable_decomposer: bool = False
    disable_allocator: bool = False
    disable_verifier: bool = False
    disable_alignment: bool = False

    output_root_dir: str = os.path.join("output")

    def __attrs_post_init__(self):
        validate_config(self)

    @property
    def weights(self) -> AllocationWeights:
        return AllocationWeights(self.weight_weak, self.weight_strong, self.weight_utility, self.weak_k)

    @property
    def generation_defaults(self) -> dict:
        return {"max_length": self.max_length, "beam_width": self.beam_width, "temperature": self.temperature}

    @property
    def ablations(self) -> list:
        return [name for name in ABLATIONS if getattr(self, f"disable_{name}")]

    @property
    def trace_file(self):
        return os.path.join(self.output_root_dir, "trace.json")

    def ablate(self, *names: str) -> "PipelineConfig":
        unknown = [name for name in names if name not in ABLATIONS]
        if unknown:
            raise ConfigError(f"unknown ablation {unknown[0]!r}, expected one of {list(ABLATIONS)}")
        return attr.evolve(self, **{f"disable_{name}": True for name in names})

    def __str__(self) -> str:
        ablated = ", ".join(self.ablations) or "none"
        return f"{self.backend} backend, k={self.weak_k}, m={self.perturbations}, width {self.parallelism}; ablated: {ablated}"


def validate_config(config: PipelineConfig):
    weights = (config.weight_weak, config.weight_strong, config.weight_utility)
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ConfigError(f"score weights must be non-negative and sum to 1, got {weights}")
    for name in ("weak_k", "perturbations", "fan_out_cap", "parallelism", "max_length", "beam_width"):
        if getattr(config, name) < 1:
            raise ConfigError(f"{name} must be at least 1, got {getattr(config, name)}")
    if config.retries < 0:
        raise ConfigError(f"retries must be non-negative, got {config.retries}")
    if config.clarification not in (INTERACTIVE, FAIL_FAST):
        raise ConfigError(f"clarification must be {INTERACTIVE} or {FAIL_FAST}, got {config.clarification!r}")
    if config.conflict_policy not in (KEEP, DROP):
        raise ConfigError(f"conflict_policy must be {KEEP} or {DROP}, got {config.conflict_policy!r}")
    if config.token_ceiling is not None and config.token_ceiling < 1:
        raise ConfigError("token_ceiling must be at least 1")


def _convert(field: attr.Attribute, raw: str):
    kind = field.type
    optional = getattr(kind, "__origin__", None) is not None and type(None) in kind.__args__
    if optional:
        if raw.strip().lower() in ("", "none"):
            return None
        kind = next(arg for arg in kind.__args__ if arg is not type(None))
    if kind is bool:
        value = raw.strip().lower()
        if value in ("1", "true", "yes", "on"):
            return True
        if value in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return kind(raw.strip())


def config_from_dict(values: dict, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """Keys mirror the field names; hyphens are accepted in place of underscores."""
    fields = attr.fields_dict(PipelineConfig)
    changes = {}
    for key, raw in values.items():
        name = key.strip().replace("-", "_")
        if name not in fields:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            changes[name] = _convert(fields[name], raw) if isinstance(raw, str) else raw
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from e
    return attr.evolve(base or PipelineConfig(), **changes)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Reads a flat ``key = value`` file; ``overrides`` (from the command line) win over it."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as f:
                parser.read_string(f"[{_SECTION}]\n" + f.read(), source=path)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"cannot read configuration {path}: {e}") from e
        values.update(parser[_SECTION])
        registry = values.get("registry")
        if registry and not os.path.isabs(registry):
            values["registry"] = os.path.join(os.path.dirname(os.path.abspath(path)), registry)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(values)
