from typing import Dict, List, Optional

import pandas as pd
from attr import Factory, asdict, dataclass

FULL = "full"


@dataclass
class MetricValues:
    item_id: str
    configuration: str
    setting: str
    exp_number: int  # seed

    ea: int
    qsc: int
    tokens: int

    tf1: Optional[float] = None
    status: Optional[str] = None
    error: Optional[str] = None
    time: Optional[float] = None


@dataclass
class MetricSummary:
    # percentages, ATU in tokens; the deviations are across seeds
    ea: float
    qsc: float
    atu: float
    tf1: Optional[float] = None

    ea_std: Optional[float] = None
    qsc_std: Optional[float] = None
    tf1_std: Optional[float] = None
    atu_std: Optional[float] = None

    def deviations(self) -> List[float]:
        return [v for v in (self.ea_std, self.qsc_std, self.tf1_std, self.atu_std) if v is not None]


def _cell(mean: Optional[float], std: Optional[float], digits: int = 2) -> str:
    if mean is None:
        return "-"
    return f"{mean:.{digits}f}" if std is None else f"{mean:.{digits}f} ± {std:.{digits}f}"


@dataclass
class MetricsReport:
    seeds: List[int]
    configurations: Dict[str, MetricSummary]
    records: List[MetricValues] = Factory(list)
    footer: Optional[str] = None

    @property
    def headline(self) -> MetricSummary:
        return self.configurations.get(FULL) or next(iter(self.configurations.values()))

    @property
    def ea(self) -> float:
        return self.headline.ea

    @property
    def qsc(self) -> float:
        return self.headline.qsc

    @property
    def tf1(self) -> Optional[float]:
        return self.headline.tf1

    @property
    def atu(self) -> float:
        return self.headline.atu

    def table(self) -> pd.DataFrame:
        rows = [
            {
                "configuration": name,
                "EA (%)": _cell(s.ea, s.ea_std),
                "QSC (%)": _cell(s.qsc, s.qsc_std),
                "TF1 (%)": _cell(s.tf1, s.tf1_std),
                "ATU": _cell(s.atu, s.atu_std, 1),
            }
            for name, s in self.configurations.items()
        ]
        return pd.DataFrame.from_records(rows).set_index("configuration")

    def records_frame(self) -> pd.DataFrame:
        return pd.DataFrame.from_records([asdict(r) for r in self.records])

    def to_json(self) -> dict:
        headline = self.headline
        return {
            "seeds": list(self.seeds),
            "ea": headline.ea,
            "qsc": headline.qsc,
            "tf1": headline.tf1,
            "atu": headline.atu,
            "ea_std": headline.ea_std,
            "qsc_std": headline.qsc_std,
            "tf1_std": headline.tf1_std,
            "atu_std": headline.atu_std,
            "configurations": {name: asdict(summary) for name, summary in self.configurations.items()},
            "records": [asdict(r) for r in self.records],
            "footer": self.footer,
        }
