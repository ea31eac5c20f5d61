from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from bisformer.core.errors import MisalignedSeries, WindowExceedsSeries
from bisformer.imbalance.lds import N_BINS, REGIONS, bis_bin, region_of

MUTATION_WINDOW_S = 30
MUTATION_MAGNITUDES = (5, 7, 10)


def binned_test_error(preds, trues) -> pd.Series:
    """|sum of signed errors| / count per rounded true-BIS bin; empty bins are absent."""
    preds = np.asarray(preds, dtype=np.float64)
    trues = np.asarray(trues, dtype=np.float64)
    if preds.shape != trues.shape:
        raise MisalignedSeries("binned error inputs differ in length", pred=len(preds), true=len(trues))
    frame = pd.DataFrame({"bin": np.clip(bis_bin(trues), 0, N_BINS - 1), "err": preds - trues})
    grouped = frame.groupby("bin")["err"]
    error = grouped.sum().abs() / grouped.count()
    error.name = "error"
    return error.sort_index()


def error_reduction(reference: pd.Series, candidate: pd.Series, lo: int, hi: int) -> float:
    """Relative drop of the mean binned error over bins lo..hi present in both series."""
    common = reference.index.intersection(candidate.index)
    common = common[(common >= lo) & (common <= hi)]
    if not len(common):
        return float("nan")
    ref = float(reference.loc[common].mean())
    cand = float(candidate.loc[common].mean())
    return (ref - cand) / ref if ref > 0 else float("nan")


@dataclass
class MutationStats:
    magnitude: float
    n_points: int
    mask: np.ndarray
    counts: Dict[str, int] = field(default_factory=dict)

    @property
    def n_mutations(self) -> int:
        return int(self.mask.sum())

    @property
    def fractions(self) -> Dict[str, float]:
        total = self.n_mutations
        return {name: (count / total if total else 0.0) for name, count in self.counts.items()}


def mutation_stats(bis, m: float, window: int = MUTATION_WINDOW_S) -> MutationStats:
    """Points whose value is more than m from the min or max of the open (t-w, t+w) window.

    The window is clipped at the series ends.
    """
    bis = np.asarray(bis, dtype=np.float64)
    if m <= 0:
        raise ValueError("mutation magnitude must be positive")
    size = 2 * window - 1
    if len(bis) < size:
        raise WindowExceedsSeries(f"series of {len(bis)} s shorter than the {size} s window", length=len(bis))
    lo = minimum_filter1d(bis, size=size, mode="nearest")
    hi = maximum_filter1d(bis, size=size, mode="nearest")
    mask = (np.abs(bis - lo) > m) | (np.abs(bis - hi) > m)
    counts = {name: 0 for name, _, _ in REGIONS}
    for value in bis[mask]:
        counts[region_of(min(max(value, 0.0), 100.0))] += 1
    return MutationStats(magnitude=m, n_points=len(bis), mask=mask, counts=counts)


def maintenance_mutation_stats(
    bis, split, magnitudes=MUTATION_MAGNITUDES, window: int = MUTATION_WINDOW_S,
) -> List[MutationStats]:
    """Mutation statistics over the maintenance span only; `bis` is indexed by second.

    Raises WindowExceedsSeries when maintenance is shorter than the 2w - 1 s window.
    """
    lo, hi = split.maintenance
    segment = np.asarray(bis, dtype=np.float64)[lo:hi]
    return [mutation_stats(segment, m, window) for m in magnitudes]
