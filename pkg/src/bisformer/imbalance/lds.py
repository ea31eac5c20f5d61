"""Label distribution smoothing over integer BIS bins and the derived loss weights."""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd

from bisformer.core.errors import EmptyDensity, OutOfRangeTarget
from bisformer.utils.files import write_frame_atomic

N_BINS = 101

# label regions by frequency: name, lower bound (inclusive), upper bound (exclusive)
REGIONS: Tuple[Tuple[str, float, float], ...] = (
    ("below_31", 0.0, 31.0),
    ("many", 31.0, 48.0),
    ("medium_low", 48.0, 54.0),
    ("medium_high", 54.0, 64.0),
    ("few", 64.0, float(N_BINS)),
)


def bis_bin(values) -> np.ndarray:
    """Integer bin of each BIS value, rounding halves up."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(np.int64)


def region_of(value: float) -> str:
    for name, lo, hi in REGIONS:
        if lo <= value < hi:
            return name
    raise OutOfRangeTarget(f"BIS value {value} outside [0, 100]", value=value)


@dataclass(frozen=True)
class LabelDensity:
    empirical: np.ndarray
    smoothed: np.ndarray
    kernel_sigma: float
    kernel_radius: int

    @property
    def total(self) -> float:
        return float(self.empirical.sum())


@dataclass(frozen=True)
class WeightTable:
    w: np.ndarray
    density: LabelDensity

    def lookup(self, bis) -> np.ndarray:
        return self.w[np.clip(bis_bin(bis), 0, N_BINS - 1)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bin": np.arange(N_BINS),
            "empirical": self.density.empirical,
            "smoothed": self.density.smoothed,
            "weight": self.w,
        })


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-offsets ** 2 / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def _spread_matrix(sigma: float, radius: int) -> np.ndarray:
    # column i spreads bin i's count over its in-range neighbours, renormalized to mass 1
    kernel = gaussian_kernel(sigma, radius)
    matrix = np.zeros((N_BINS, N_BINS))
    for i in range(N_BINS):
        lo, hi = max(0, i - radius), min(N_BINS - 1, i + radius)
        part = kernel[lo - i + radius:hi - i + radius + 1]
        matrix[lo:hi + 1, i] = part / part.sum()
    return matrix


def smooth_density(targets, sigma: float = 2.0, radius: int = 4) -> LabelDensity:
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if sigma <= 0 or radius < 1:
        raise ValueError("sigma must be positive and radius at least 1")
    if targets.size and (np.any(~np.isfinite(targets)) or targets.min() < 0 or targets.max() > 100):
        raise OutOfRangeTarget(
            "targets must lie in [0, 100]",
            low=float(np.nanmin(targets)), high=float(np.nanmax(targets)),
        )
    empirical = np.bincount(bis_bin(targets), minlength=N_BINS).astype(np.float64)
    smoothed = _spread_matrix(sigma, radius) @ empirical
    return LabelDensity(empirical=empirical, smoothed=smoothed, kernel_sigma=sigma, kernel_radius=radius)


def weights_from_density(density: LabelDensity, w_cap: float = 50.0) -> WeightTable:
    """Inverse smoothed density, scaled so the best-populated bin weighs 1, capped at w_cap."""
    occupied = density.smoothed > 0
    if not occupied.any():
        raise EmptyDensity("smoothed label density has no occupied bins")
    raw = np.full(N_BINS, np.inf)
    raw[occupied] = 1.0 / density.smoothed[occupied]
    w = raw / raw[occupied].min()
    w[~occupied] = w_cap
    return WeightTable(w=np.minimum(w, w_cap), density=density)


def region_weight_bands(table: WeightTable) -> Dict[str, float]:
    """Mean weight over the occupied bins of each label region (NaN if none occupied)."""
    bins = np.arange(N_BINS)
    occupied = table.density.smoothed > 0
    bands: Dict[str, float] = {}
    for name, lo, hi in REGIONS:
        mask = (bins >= lo) & (bins < hi) & occupied
        bands[name] = float(table.w[mask].mean()) if mask.any() else float("nan")
    return bands


def write_weight_table_csv(path: Union[str, Path], table: WeightTable) -> Path:
    return write_frame_atomic(path, table.to_frame())
