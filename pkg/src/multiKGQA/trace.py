"""Pipeline trace: what every stage decided for one question, in stage order."""
import json
import os
from typing import Dict, List, Optional

from attr import Factory, dataclass

from multiKGQA.backend import GenerationResponse

TIMING_KEYS = ("timings", "exec_time")

ANSWERED = "answered"
CLARIFICATION_NEEDED = "clarification-needed"
FAILED = "failed"


class DictJsonEncoder(json.JSONEncoder):
    def default(self, o):
        if hasattr(o, "to_json"):
            return o.to_json()
        return o.__dict__


def call_record(response: GenerationResponse) -> dict:
    return {
        "role": response.role,
        "backend": response.backend_id,
        "prompt_tokens": response.prompt_tokens,
        "completion_tokens": response.completion_tokens,
        "refused": response.refused,
    }


@dataclass
class AttemptTrace:
    graph_id: str
    synthesis: Optional[dict] = None
    verifications: List[dict] = Factory(list)
    executions: List[dict] = Factory(list)
    error: Optional[str] = None
    outcome: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "synthesis": self.synthesis,
            "verifications": self.verifications,
            "executions": self.executions,
            "error": self.error,
            "outcome": self.outcome,
        }


@dataclass
class SubgoalTrace:
    subgoal: dict
    allocation: Optional[dict] = None
    attempts: List[AttemptTrace] = Factory(list)
    answer: Optional[dict] = None
    skip_reason: Optional[str] = None
    calls: List[dict] = Factory(list)
    timings: Dict[str, float] = Factory(dict)

    @property
    def subgoal_id(self) -> int:
        return self.subgoal["id"]

    @property
    def skipped(self) -> bool:
        return self.skip_reason is not None

    def to_json(self) -> dict:
        return {
            "subgoal": self.subgoal,
            "allocation": self.allocation,
            "attempts": [attempt.to_json() for attempt in self.attempts],
            "answer": self.answer,
            "skip_reason": self.skip_reason,
            "calls": self.calls,
            "timings": self.timings,
        }


@dataclass
class PipelineTrace:
    question: str
    config: Dict[str, object] = Factory(dict)
    clarifications: List[dict] = Factory(list)
    plan: List[dict] = Factory(list)
    subgoals: List[SubgoalTrace] = Factory(list)
    alignment: Optional[dict] = None
    consensus: Optional[dict] = None
    calls: List[dict] = Factory(list)
    timings: Dict[str, float] = Factory(dict)
    status: str = ANSWERED
    error: Optional[str] = None

    def all_calls(self) -> List[dict]:
        """Every backend call of the question: question-level calls, then per subgoal in id order."""
        calls = list(self.calls)
        for subgoal in sorted(self.subgoals, key=lambda s: s.subgoal_id):
            calls.extend(subgoal.calls)
        return calls

    @property
    def total_tokens(self) -> int:
        return sum(call["prompt_tokens"] + call["completion_tokens"] for call in self.all_calls())

    def subgoal(self, subgoal_id: int) -> SubgoalTrace:
        for subgoal in self.subgoals:
            if subgoal.subgoal_id == subgoal_id:
                return subgoal
        raise KeyError(subgoal_id)

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "status": self.status,
            "error": self.error,
            "config": self.config,
            "clarifications": self.clarifications,
            "plan": self.plan,
            "subgoals": [s.to_json() for s in sorted(self.subgoals, key=lambda s: s.subgoal_id)],
            "alignment": self.alignment,
            "consensus": self.consensus,
            "calls": self.calls,
            "total_tokens": self.total_tokens,
            "timings": self.timings,
        }

    def save(self, path: str):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self, f, cls=DictJsonEncoder, indent=2, ensure_ascii=False)
            f.write("\n")


def without_timings(obj):
    """A copy of a JSON-shaped value with every wall-clock field removed."""
    if isinstance(obj, dict):
        return {k: without_timings(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [without_timings(v) for v in obj]
    return obj
