from typing import Tuple

from multiKGQA.errors import ConfigError
from multiKGQA.metric_values import FULL
from multiKGQA.pipeline_config import ABLATIONS, PipelineConfig


class AblationConfig:
    def __init__(self, name: str, disabled: Tuple[str, ...] = ()):
        self.name = name
        self.disabled = disabled

    def apply(self, config: PipelineConfig) -> PipelineConfig:
        return config.ablate(*self.disabled)


class AblationConfigs:
    FULL = AblationConfig(FULL)

    WITHOUT_DECOMPOSER = AblationConfig("w/o decomposer", ("decomposer",))
    WITHOUT_ALLOCATOR = AblationConfig("w/o allocator", ("allocator",))
    WITHOUT_VERIFIER = AblationConfig("w/o verifier", ("verifier",))
    WITHOUT_ALIGNMENT = AblationConfig("w/o alignment", ("alignment",))

    @classmethod
    def for_switch(cls, switch: str) -> AblationConfig:
        if switch not in ABLATIONS:
            raise ConfigError(f"unknown ablation {switch!r}, expected one of {list(ABLATIONS)}")
        return getattr(cls, f"WITHOUT_{switch.upper()}")
