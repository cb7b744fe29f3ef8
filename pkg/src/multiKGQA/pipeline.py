"""End-to-end question answering over the registered graphs.

For one question: decompose (with clarification rounds when the question is
ambiguous), then per subgoal allocate, synthesize, verify and execute,
falling back to the next-ranked graphs before the subgoal is skipped, and
finally align and fuse the surviving answer sets. Subgoals of one dependency
level run in parallel; a dependent subgoal waits for the level before it.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import attr
from attr import Factory, dataclass

from multiKGQA.aggregator import ConsensusAnswer, align_entities, fuse, identity_alignment
from multiKGQA.allocator import AllocationDecision, allocate, allocate_by_term_overlap
from multiKGQA.backend import AccountingBackend, Backend, build_prompt, make_backend
from multiKGQA.errors import (
    AllSubgoalsFailed,
    ClarificationNeeded,
    KGQAError,
    NoViableGraph,
    RegistryError,
    SynthesisError,
)
from multiKGQA.execution import AnswerSet, CachedExecutor, ResultCache
from multiKGQA.lexicon import Lexicon, load_lexicon
from multiKGQA.pipeline_config import INTERACTIVE, PipelineConfig
from multiKGQA.registry import GraphRegistry, load_registry
from multiKGQA.sparql_ast import serialize_sparql
from multiKGQA.subgoals import ClarificationRequest, Subgoal, SubgoalParser, rule_handler
from multiKGQA.synthesizer import Synthesizer
from multiKGQA.templates import TemplateLibrary, load_templates
from multiKGQA.trace import (
    CLARIFICATION_NEEDED,
    FAILED,
    AttemptTrace,
    PipelineTrace,
    SubgoalTrace,
    call_record,
)
from multiKGQA.verifier import verify

logger = logging.getLogger(__name__)

# settings that change how a question is run but never its answer
RUNTIME_FIELDS = ("parallelism", "output_root_dir")

Clarifications = Union[None, str, Sequence[str]]


@dataclass
class SubgoalOutcome:
    subgoal: Subgoal
    trace: SubgoalTrace
    answer: Optional[AnswerSet] = None
    feedback: List[Tuple[str, str]] = Factory(list)


def dependency_levels(plan: List[Subgoal]) -> List[List[Subgoal]]:
    """Groups subgoals so that each one comes after the subgoal it depends on."""
    level_of: Dict[int, int] = {}
    levels: List[List[Subgoal]] = []
    for subgoal in plan:
        level = 0 if subgoal.depends_on is None else level_of[subgoal.depends_on] + 1
        level_of[subgoal.id] = level
        while len(levels) <= level:
            levels.append([])
        levels[level].append(subgoal)
    return levels


def merge_dependent(
    subgoal: Subgoal, graph_id: str, prior: Optional[AnswerSet], accepted: List[Tuple[object, AnswerSet]]
) -> AnswerSet:
    """Joins the answer sets of a subgoal's queries with the prior rows they were bound from.

    On a shared variable name the dependent binding wins; variables only the
    prior answer set has fill the rest of the row.
    """
    first = accepted[0][1]
    if prior is None or first.is_boolean or prior.is_boolean:
        return attr.evolve(first, subgoal_id=subgoal.id)

    key = prior.variables[0]
    variables = list(prior.variables)
    for _, answer in accepted:
        variables.extend(v for v in answer.variables if v not in variables)
    rows = []
    for value, answer in accepted:
        for row in answer.rows:
            bound = value if value is not None else row.get("value")
            for prior_row in prior.rows:
                if prior_row.get(key) != bound:
                    continue
                merged = dict(prior_row)
                merged.update(row)
                rows.append(merged)

    sources = {v: prior.source_of(v) for v in prior.variables}
    for _, answer in accepted:
        sources.update({v: graph_id for v in answer.variables})
    return AnswerSet(
        query=first.query,
        graph_id=graph_id,
        variables=variables,
        rows=rows,
        exec_time=sum(answer.exec_time for _, answer in accepted),
        truncated=any(answer.truncated for _, answer in accepted),
        subgoal_id=subgoal.id,
        sources=sources,
        provenance=prior.chain() + [(graph_id, subgoal.id)],
    )


def _final_answers(plan: List[Subgoal], answers: Dict[int, AnswerSet]) -> List[AnswerSet]:
    """Answer sets no successful dependent subgoal has consumed, in subgoal order."""
    consumed = {s.depends_on for s in plan if s.depends_on is not None and s.id in answers}
    return [answers[s.id] for s in plan if s.id in answers and s.id not in consumed]


class Pipeline:
    def __init__(
        self,
        config: PipelineConfig,
        registry: Optional[GraphRegistry] = None,
        backend: Optional[Backend] = None,
        lexicon: Optional[Lexicon] = None,
        library: Optional[TemplateLibrary] = None,
    ):
        self.config = config
        self.registry = registry if registry is not None else load_registry(config.registry)
        self.lexicon = lexicon or load_lexicon(config.lexicon)
        self.library = library or load_templates(config.templates)
        self.backend = backend or make_backend(
            config.backend,
            url=config.backend_url,
            model=config.backend_model,
            api_key_env=config.api_key_env,
            token_ceiling=config.token_ceiling,
            handlers={"decompose": rule_handler(self.lexicon)},
        )
        self.cache = ResultCache()

    def _accounting(self) -> AccountingBackend:
        return AccountingBackend(self.backend, self.config.generation_defaults)

    def _new_trace(self, question: str) -> PipelineTrace:
        settings = attr.asdict(self.config)
        return PipelineTrace(
            question=question,
            config={k: v for k, v in settings.items() if k not in RUNTIME_FIELDS},
        )

    def answer(
        self,
        question: str,
        clarifications: Clarifications = None,
        ask: Optional[Callable[[ClarificationRequest], str]] = None,
    ) -> Tuple[ConsensusAnswer, PipelineTrace]:
        """Answers one question.

        ``clarifications`` are canned answers used for clarification rounds in
        order; once they run out, ``ask`` is consulted in interactive mode and
        fail-fast mode raises :class:`ClarificationNeeded`.
        """
        if not len(self.registry):
            raise RegistryError("the registry has no graphs")
        trace = self._new_trace(question)
        calls = self._accounting()
        started = time.perf_counter()
        with self.registry.question():
            try:
                plan = self._decompose(question, clarifications, ask, calls, trace)
                trace.timings["decompose"] = time.perf_counter() - started
                answers = self._solve_plan(plan, trace)
                consensus = self._aggregate(plan, answers, calls, trace)
            except ClarificationNeeded as e:
                trace.status = CLARIFICATION_NEEDED
                e.trace = trace
                raise
            except KGQAError as e:
                trace.status = FAILED
                trace.error = f"{type(e).__name__}: {e}"
                e.trace = trace
                raise
            finally:
                trace.calls = [call_record(r) for r in calls.responses]
                trace.timings["total"] = time.perf_counter() - started
        return consensus, trace

    # decomposition

    def _decompose(self, question, clarifications, ask, calls, trace) -> List[Subgoal]:
        parser = SubgoalParser(self.lexicon, calls)
        if self.config.disable_decomposer:
            plan = parser.single_subgoal(question)
        else:
            if isinstance(clarifications, str):
                clarifications = [clarifications]
            pending = list(clarifications or [])
            plan = parser.decompose(question)
            while isinstance(plan, ClarificationRequest):
                request = plan
                if pending:
                    reply = pending.pop(0)
                elif ask is not None and self.config.clarification == INTERACTIVE:
                    prompt = build_prompt(
                        "Ask the user to resolve the ambiguity.",
                        question=request.question,
                        readings="; ".join(request.readings),
                    )
                    worded = calls.request("clarify", prompt)
                    reply = ask(request if worded.refused else attr.evolve(request, question=worded.text))
                else:
                    trace.clarifications.append({"request": request.to_json(), "answer": None})
                    raise ClarificationNeeded(request)
                trace.clarifications.append({"request": request.to_json(), "answer": reply})
                plan = parser.clarify(request.source or question, reply, request.rounds)
        trace.plan = [subgoal.to_json() for subgoal in plan]
        logger.info("%d subgoal(s) for %r", len(plan), question)
        return plan

    # per-subgoal work

    def _solve_plan(self, plan: List[Subgoal], trace: PipelineTrace) -> Dict[int, AnswerSet]:
        started = time.perf_counter()
        answers: Dict[int, AnswerSet] = {}
        outcomes: List[SubgoalOutcome] = []
        with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
            for level in dependency_levels(plan):
                priors = [answers.get(s.depends_on) if s.depends_on is not None else None for s in level]
                for outcome in pool.map(self._solve, level, priors):
                    outcomes.append(outcome)
                    if outcome.answer is not None:
                        answers[outcome.subgoal.id] = outcome.answer
        trace.subgoals = [outcome.trace for outcome in outcomes]
        trace.timings["subgoals"] = time.perf_counter() - started

        if self.config.utility_feedback:
            for outcome in sorted(outcomes, key=lambda o: o.subgoal.id):
                for graph_id, result in outcome.feedback:
                    if graph_id in self.registry:
                        self.registry.update_utility(graph_id, result)
        return answers

    def _allocate(self, subgoal: Subgoal) -> AllocationDecision:
        if self.config.disable_allocator:
            return allocate_by_term_overlap(subgoal, self.registry)
        return allocate(subgoal, self.registry, self.lexicon, self.config.weights)

    def _solve(self, subgoal: Subgoal, prior: Optional[AnswerSet]) -> SubgoalOutcome:
        outcome = SubgoalOutcome(subgoal, SubgoalTrace(subgoal.to_json()))
        trace = outcome.trace
        if subgoal.depends_on is not None:
            if prior is None:
                trace.skip_reason = f"dependency {subgoal.depends_on} was skipped"
                return outcome
            if prior.is_empty():
                trace.skip_reason = f"dependency {subgoal.depends_on} returned no rows"
                return outcome

        calls = self._accounting()
        try:
            started = time.perf_counter()
            try:
                decision = self._allocate(subgoal)
            except NoViableGraph as e:
                trace.skip_reason = str(e)
                return outcome
            finally:
                trace.timings["allocate"] = time.perf_counter() - started
            trace.allocation = decision.to_json()

            synthesizer = Synthesizer(self.library, self.lexicon, calls, self.config.fan_out_cap)
            candidates = [decision.graph_id] + decision.fallbacks[: self.config.retries]
            for graph_id in candidates:
                attempt = AttemptTrace(graph_id)
                trace.attempts.append(attempt)
                answer = self._attempt(subgoal, decision.for_graph(graph_id), prior, synthesizer, attempt, trace)
                if attempt.outcome is not None and not self.config.disable_verifier:
                    outcome.feedback.append((graph_id, attempt.outcome))
                if answer is not None:
                    outcome.answer = answer
                    trace.answer = dict(answer.to_sparql_json(), graph_id=graph_id)
                    return outcome
                logger.info("subgoal %d failed on %s: %s", subgoal.id, graph_id, attempt.error)
            trace.skip_reason = f"no verified query on {', '.join(candidates)}"
            return outcome
        finally:
            trace.calls = [call_record(r) for r in calls.responses]

    def _attempt(
        self,
        subgoal: Subgoal,
        decision: AllocationDecision,
        prior: Optional[AnswerSet],
        synthesizer: Synthesizer,
        attempt: AttemptTrace,
        trace: SubgoalTrace,
    ) -> Optional[AnswerSet]:
        entry = self.registry.get(decision.graph_id)
        executor = CachedExecutor(entry.executor(self.config.timeout), self.cache)

        started = time.perf_counter()
        try:
            synthesis = synthesizer.synthesize(subgoal, decision, entry.schema, prior)
        except SynthesisError as e:
            attempt.error = f"{type(e).__name__}: {e}"
            return None
        finally:
            trace.timings["synthesize"] = trace.timings.get("synthesize", 0.0) + time.perf_counter() - started
        attempt.synthesis = synthesis.to_json()

        accepted = []
        for query, value in zip(synthesis.queries, synthesis.bound_values):
            if not self.config.disable_verifier:
                started = time.perf_counter()
                report = verify(query, entry.schema, executor, self.config.perturbations)
                trace.timings["verify"] = trace.timings.get("verify", 0.0) + time.perf_counter() - started
                attempt.verifications.append(report.to_json())
                if not report.passed:
                    continue
            started = time.perf_counter()
            try:
                answer = executor.execute(query)
            except KGQAError as e:
                attempt.error = f"{type(e).__name__}: {e}"
                return None
            finally:
                trace.timings["execute"] = trace.timings.get("execute", 0.0) + time.perf_counter() - started
            attempt.executions.append(
                {"query": serialize_sparql(query), "rows": 0 if answer.is_boolean else len(answer.rows), "exec_time": answer.exec_time}
            )
            accepted.append((value, answer))

        if not accepted:
            attempt.outcome = "verified-fail"
            failed = [v["failed_check"] or v["verdict"] for v in attempt.verifications]
            attempt.error = "no query passed verification (" + ", ".join(sorted(set(failed))) + ")"
            return None
        answer = merge_dependent(subgoal, decision.graph_id, prior, accepted)
        attempt.outcome = "empty-result" if answer.is_empty() else "verified-pass"
        return answer

    # aggregation

    def _aggregate(
        self, plan: List[Subgoal], answers: Dict[int, AnswerSet], calls: AccountingBackend, trace: PipelineTrace
    ) -> ConsensusAnswer:
        final = _final_answers(plan, answers)
        if not final:
            reasons = "; ".join(f"subgoal {s.subgoal_id}: {s.skip_reason}" for s in trace.subgoals)
            raise AllSubgoalsFailed(f"every subgoal failed ({reasons})", trace)
        started = time.perf_counter()
        if self.config.disable_alignment:
            table = identity_alignment(final)
        else:
            table = align_entities(final, self.registry.stores())
        consensus = fuse(final, table, calls, self.config.conflict_policy)
        trace.alignment = table.to_json()
        trace.consensus = consensus.to_json()
        trace.timings["aggregate"] = time.perf_counter() - started
        return consensus


def answer_question(
    question: str,
    config: PipelineConfig,
    registry: Optional[GraphRegistry] = None,
    clarifications: Clarifications = None,
    ask: Optional[Callable[[ClarificationRequest], str]] = None,
) -> Tuple[ConsensusAnswer, PipelineTrace]:
    return Pipeline(config, registry).answer(question, clarifications, ask)
