from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from bisformer.core.errors import MisalignedSeries, ZeroTrueValue
from bisformer.metrics.periods import PERIODS, PeriodSplit

METRICS = ("mdpe", "mdape", "rmse")


@dataclass(frozen=True)
class PeriodMetrics:
    mdpe: float
    mdape: float
    rmse: float
    n: int


@dataclass
class CaseMetrics:
    periods: Dict[str, PeriodMetrics]

    @property
    def overall(self) -> PeriodMetrics:
        return self.periods["overall"]

    def to_rows(self, case_id: str, method: str) -> List[dict]:
        return [
            {"case_id": case_id, "method": method, "period": name,
             "mdpe": m.mdpe, "mdape": m.mdape, "rmse": m.rmse, "n": m.n}
            for name, m in self.periods.items()
        ]


def performance_errors(pred, true) -> np.ndarray:
    """PE in percent of the true value."""
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if pred.shape != true.shape:
        raise MisalignedSeries("prediction and truth differ in length", pred=len(pred), true=len(true))
    if np.any(true == 0):
        raise ZeroTrueValue("performance error undefined where the true BIS is 0", count=int((true == 0).sum()))
    return 100.0 * (pred - true) / true


def period_metrics(pred, true) -> PeriodMetrics:
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if not len(pred):
        return PeriodMetrics(float("nan"), float("nan"), float("nan"), 0)
    pe = performance_errors(pred, true)
    return PeriodMetrics(
        mdpe=float(np.median(pe)),
        mdape=float(np.median(np.abs(pe))),
        rmse=float(np.sqrt(np.mean((pred - true) ** 2))),
        n=len(pred),
    )


def case_metrics(
    pred, true, split: Optional[PeriodSplit] = None, times: Optional[np.ndarray] = None
) -> CaseMetrics:
    """MDPE/MDAPE/RMSE per period and overall; without a split only `overall` is computed."""
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if pred.shape != true.shape:
        raise MisalignedSeries("prediction and truth differ in length", pred=len(pred), true=len(true))
    if split is None:
        return CaseMetrics({"overall": period_metrics(pred, true)})
    times = np.arange(len(pred)) if times is None else np.asarray(times)
    periods = {name: period_metrics(pred[m], true[m]) for name, m in split.masks(times).items()}
    return CaseMetrics(periods)


def cohort_summary(rows: pd.DataFrame) -> pd.DataFrame:
    """Mean, SD, min and max of case-level metrics per method and period."""
    order = {name: i for i, name in enumerate(PERIODS + ("overall",))}
    grouped = rows.groupby(["method", "period"], sort=False)[list(METRICS)]
    summary = grouped.agg(["mean", "std", "min", "max"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    summary = summary.reset_index()
    summary["_order"] = summary["period"].map(order)
    return summary.sort_values(["method", "_order"]).drop(columns="_order").reset_index(drop=True)
