# %%
import json
import os

import pandas as pd

RESULTS_DIR = "output"
REPORT_FILE = "report.json"


def read_results(results_dir: str = RESULTS_DIR) -> pd.DataFrame:
    """Per-item records of every report under ``results_dir``, tagged with the report's directory."""
    results = []
    for directory, subdirs, files in os.walk(results_dir):
        if REPORT_FILE in files:
            with open(os.path.join(directory, REPORT_FILE), "r", encoding="utf-8") as f:
                report = json.load(f)
            for record in report["records"]:
                record["run"] = os.path.relpath(directory, results_dir)
                results.append(record)
    return pd.DataFrame.from_records(results)


def ea_table(results_df: pd.DataFrame) -> pd.DataFrame:
    """EA (%) per run and configuration, split by single- and cross-graph items."""
    return (
        results_df.pivot_table(values="ea", index=["run", "configuration"], columns="setting", aggfunc="mean")
        * 100
    ).round(2)


# %%
if __name__ == "__main__":
    results_df = read_results()
    pd.set_option("display.max_rows", 500)
    print(ea_table(results_df))
