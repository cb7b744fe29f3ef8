# %%
import os

from multiKGQA.fixtures import FAULTS_REGISTRY, REGISTRY, make_fixtures
from multiKGQA.pipeline_config import ABLATIONS, PipelineConfig
from multiKGQA.read_results import REPORT_FILE, ea_table, read_results
from multiKGQA.run_benchmark import run_bench

FIXTURES_DIR = os.path.join("fixtures")

if __name__ == "__main__":
    written = make_fixtures(FIXTURES_DIR)
    for registry in [
        REGISTRY,
        FAULTS_REGISTRY,
    ]:
        config = PipelineConfig(registry=os.path.join(FIXTURES_DIR, registry))
        print(f"Starting: {registry}, {config}...")

        report = run_bench(
            written["corpus"],
            config,
            seeds=[0, 1, 2],
            ablations=ABLATIONS,
            report_path=os.path.join(config.output_root_dir, os.path.splitext(registry)[0], REPORT_FILE),
        )
        print(report.table().to_string())

        print(f"Finished: {registry}")

    print(ea_table(read_results()))
