"""Report tables: per-case metrics, cohort summary, CCC, binned errors and mutations."""
import math
from typing import List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from bisformer.imbalance.lds import N_BINS, REGIONS, WeightTable, region_weight_bands
from bisformer.metrics.agreement import CccResult
from bisformer.metrics.binned import MutationStats
from bisformer.metrics.clinical import METRICS
from bisformer.metrics.periods import PERIODS

METRIC_LABELS = {"mdpe": "MDPE (%)", "mdape": "MDAPE (%)", "rmse": "RMSE"}


def _cell(mean: float, sd: float, lo: float, hi: float) -> str:
    if math.isnan(mean):
        return "n/a"
    sd = 0.0 if math.isnan(sd) else sd
    return f"{mean:.2f} ± {sd:.2f} ({lo:.2f}–{hi:.2f})"


def summary_table(summary: pd.DataFrame) -> pd.DataFrame:
    """Methods x metrics rows, period columns, cells as mean ± SD (min–max)."""
    rows: List[dict] = []
    for method in summary["method"].drop_duplicates():
        part = summary[summary["method"] == method].set_index("period")
        for metric in METRICS:
            row = {"method": method, "metric": METRIC_LABELS[metric]}
            for period in PERIODS + ("overall",):
                if period in part.index:
                    r = part.loc[period]
                    row[period] = _cell(r[f"{metric}_mean"], r[f"{metric}_std"], r[f"{metric}_min"], r[f"{metric}_max"])
                else:
                    row[period] = "n/a"
            rows.append(row)
    return pd.DataFrame(rows, columns=["method", "metric", *PERIODS, "overall"])


def ccc_table(results: Mapping[str, CccResult]) -> pd.DataFrame:
    return pd.DataFrame([
        {"method": name, "ccc": r.value, "ci_lower": r.lower, "ci_upper": r.upper, "n": r.n, "ci_method": r.method}
        for name, r in results.items()
    ])


def binned_error_frame(errors: Mapping[str, pd.Series]) -> pd.DataFrame:
    """101 rows, one column per method; absent bins stay empty."""
    frame = pd.DataFrame({"bin": np.arange(N_BINS)})
    for name, series in errors.items():
        frame[name] = series.reindex(range(N_BINS)).to_numpy()
    return frame


def error_reduction_frame(
    reductions: Mapping[str, Mapping[str, float]],
) -> pd.DataFrame:
    rows = [{"method": name, "range": rng, "reduction": value}
            for name, per_range in reductions.items() for rng, value in per_range.items()]
    return pd.DataFrame(rows, columns=["method", "range", "reduction"])


def mutation_frame(stats: Sequence[MutationStats], table: Optional[WeightTable] = None) -> pd.DataFrame:
    """Mutation counts and shares per label region for each magnitude, pooled over cases."""
    magnitudes = sorted({s.magnitude for s in stats})
    frame = pd.DataFrame({
        "region": [name for name, _, _ in REGIONS],
        "bis_low": [lo for _, lo, _ in REGIONS],
        "bis_high": [min(hi, 100.0) for _, _, hi in REGIONS],
    })
    for magnitude in magnitudes:
        counts = {name: 0 for name, _, _ in REGIONS}
        for s in stats:
            if s.magnitude == magnitude:
                for name, count in s.counts.items():
                    counts[name] += count
        total = sum(counts.values())
        frame[f"m{magnitude:g}_count"] = [counts[name] for name in frame["region"]]
        frame[f"m{magnitude:g}_fraction"] = [counts[name] / total if total else 0.0 for name in frame["region"]]
    if table is not None:
        bands = region_weight_bands(table)
        frame["mean_weight"] = [bands[name] for name in frame["region"]]
    return frame
