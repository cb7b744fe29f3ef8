import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import List, Optional, Sequence

import attr
import numpy as np
import pkbar

from multiKGQA.ablation_configs import AblationConfig, AblationConfigs
from multiKGQA.corpus import BenchmarkItem, load_corpus
from multiKGQA.errors import CorpusError, KGQAError
from multiKGQA.metric_values import MetricsReport, MetricSummary, MetricValues
from multiKGQA.metrics import executed_query, score_ea, score_qsc, score_tf1, synthesized_queries
from multiKGQA.pipeline import Pipeline
from multiKGQA.pipeline_config import PipelineConfig
from multiKGQA.registry import GraphRegistry, load_registry
from multiKGQA.sparql_parser import parse_sparql
from multiKGQA.trace import DictJsonEncoder

logger = logging.getLogger(__name__)

DETERMINISTIC_FOOTER = (
    "Scores were produced by the deterministic rule backend on the given corpus. "
    "Published numbers from LLM-backed runs on the original datasets are not reproducible with it."
)


def _mean_std(values: List[float]):
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) >= 2 else None
    return mean, std


def summarize(records: List[MetricValues], seeds: Sequence[int]) -> MetricSummary:
    """Per-seed means first, then mean and standard deviation over the seeds."""
    ea, qsc, tf1, atu = [], [], [], []
    for seed in seeds:
        of_seed = [r for r in records if r.exp_number == seed]
        ea.append(100 * float(np.mean([r.ea for r in of_seed])))
        qsc.append(100 * float(np.mean([r.qsc for r in of_seed])))
        atu.append(float(np.mean([r.tokens for r in of_seed])))
        scored = [r.tf1 for r in of_seed if r.tf1 is not None]
        if scored:
            tf1.append(100 * float(np.mean(scored)))
    summary = MetricSummary(ea=0.0, qsc=0.0, atu=0.0)
    summary.ea, summary.ea_std = _mean_std(ea)
    summary.qsc, summary.qsc_std = _mean_std(qsc)
    summary.atu, summary.atu_std = _mean_std(atu)
    if tf1:
        summary.tf1, summary.tf1_std = _mean_std(tf1)
    return summary


def gold_rows(item: BenchmarkItem, registry: GraphRegistry):
    """The item's gold answer, or the rows its gold query returns on its first gold graph."""
    rows = item.gold_rows()
    if rows is not None:
        return rows
    if not item.gold_graphs:
        raise CorpusError("a gold query without a gold answer needs a gold graph", item.id)
    answer = registry.get(item.gold_graphs[0]).executor().execute(parse_sparql(item.gold_query))
    return answer.rows


class Benchmark:
    def __init__(
        self,
        config: PipelineConfig,
        corpus_path: str,
        seeds: Sequence[int] = (0,),
        ablations: Sequence[str] = (),
    ):
        self.config = attr.evolve(config, utility_feedback=False)
        self.items = load_corpus(corpus_path)
        self.seeds = list(seeds)
        if not self.seeds:
            raise CorpusError("at least one seed is needed")
        self.configurations: List[AblationConfig] = [AblationConfigs.FULL] + [
            AblationConfigs.for_switch(name) for name in ablations
        ]

    @property
    def deterministic(self) -> bool:
        return self.config.backend == "rule"

    def run(self) -> MetricsReport:
        records: List[MetricValues] = []
        summaries = {}
        for configuration in self.configurations:
            config = configuration.apply(self.config)
            of_configuration = []
            for epoch, seed in enumerate(self.seeds):
                of_configuration.extend(self._run_seed(configuration.name, config, seed, epoch))
            summary = summarize(of_configuration, self.seeds)
            if self.deterministic and any(std != 0 for std in summary.deviations()):
                raise RuntimeError(f"deterministic backend gave different scores across seeds ({configuration.name})")
            summaries[configuration.name] = summary
            records.extend(of_configuration)
        return MetricsReport(
            seeds=list(self.seeds),
            configurations=summaries,
            records=records,
            footer=DETERMINISTIC_FOOTER if self.deterministic else None,
        )

    def _run_seed(self, name: str, config: PipelineConfig, seed: int, epoch: int) -> List[MetricValues]:
        registry = load_registry(config.registry)
        pipeline = Pipeline(config, registry)
        order = np.random.default_rng(seed).permutation(len(self.items))
        kbar = pkbar.Kbar(
            target=len(self.items),
            epoch=epoch,
            num_epochs=len(self.seeds),
            width=8,
            always_stateful=False,
        )
        records = []
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            futures = [
                pool.submit(self._score, pipeline, registry, self.items[int(i)], name, seed) for i in order
            ]
            for done, future in enumerate(as_completed(futures), start=1):
                record = future.result()
                records.append(record)
                kbar.update(done, values=[("EA", record.ea), ("QSC", record.qsc)])
        logger.info("%s, seed %d: %d items scored", name, seed, len(records))
        return sorted(records, key=lambda r: r.item_id)

    def _score(
        self, pipeline: Pipeline, registry: GraphRegistry, item: BenchmarkItem, name: str, seed: int
    ) -> MetricValues:
        started = time.perf_counter()
        consensus, trace, error = None, None, None
        try:
            consensus, trace = pipeline.answer(item.question, item.clarification)
        except KGQAError as e:
            trace = getattr(e, "trace", None)
            error = f"{type(e).__name__}: {e}"
            logger.debug("item %s failed: %s", item.id, error)

        queries = synthesized_queries(trace)
        tf1 = None
        if item.gold_query is not None:
            predicted = executed_query(trace)
            tf1 = score_tf1(predicted, item.gold_query) if predicted is not None else 0.0
        return MetricValues(
            item_id=item.id,
            configuration=name,
            setting=item.setting,
            exp_number=seed,
            ea=score_ea(consensus, gold_rows(item, registry)),
            qsc=int(bool(queries) and all(score_qsc(q) for q in queries)),
            tokens=trace.total_tokens if trace is not None else 0,
            tf1=tf1,
            status=trace.status if trace is not None else "failed",
            error=error,
            time=time.perf_counter() - started,
        )


def save_report(report: MetricsReport, path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, cls=DictJsonEncoder, indent=2, ensure_ascii=False)
        f.write("\n")
    report.records_frame().to_csv(os.path.splitext(path)[0] + "-records.csv", index=False)


def run_bench(
    corpus_path: str,
    config: PipelineConfig,
    seeds: Sequence[int] = (0,),
    ablations: Sequence[str] = (),
    report_path: Optional[str] = None,
) -> MetricsReport:
    report = Benchmark(config, corpus_path, seeds, ablations).run()
    if report_path is not None:
        save_report(report, report_path)
    return report
