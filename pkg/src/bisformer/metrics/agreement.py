import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from bisformer.core.errors import DegenerateSeries, MisalignedSeries

logger = logging.getLogger(__name__)

Z_975 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class CccResult:
    value: float
    lower: float
    upper: float
    n: int
    method: str = "fisher"


def _validate(pred, true):
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(true, dtype=np.float64)
    if x.shape != y.shape:
        raise MisalignedSeries("ccc inputs differ in length", pred=len(x), true=len(y))
    if len(x) < 3:
        raise DegenerateSeries(f"ccc needs at least 3 points, got {len(x)}")
    if x.var() == 0 or y.var() == 0:
        raise DegenerateSeries("ccc needs nonzero variance in both series")
    return x, y


def _lin_ccc(x: np.ndarray, y: np.ndarray) -> float:
    cov = np.mean((x - x.mean()) * (y - y.mean()))
    return float(2.0 * cov / (x.var() + y.var() + (x.mean() - y.mean()) ** 2))


def ccc_value(pred, true) -> float:
    """Lin's concordance correlation coefficient with population moments."""
    return _lin_ccc(*_validate(pred, true))


def ccc(pred, true) -> CccResult:
    """CCC with a 95% interval from the Fisher z-transform and Lin's standard error."""
    x, y = _validate(pred, true)
    n = len(x)
    rc = _lin_ccc(x, y)
    if abs(rc) >= 1.0 or n <= 3:
        return CccResult(rc, rc, rc, n)
    r = float(stats.pearsonr(x, y)[0])
    u = (x.mean() - y.mean()) / math.sqrt(x.std() * y.std())
    one_minus = 1.0 - rc ** 2
    if r == 0:
        se = 1.0 / math.sqrt(n - 3)
    else:
        var_z = (
            (1.0 - r ** 2) * rc ** 2 / (one_minus * r ** 2)
            + 2.0 * rc ** 3 * (1.0 - rc) * u ** 2 / (r * one_minus ** 2)
            - rc ** 4 * u ** 4 / (2.0 * r ** 2 * one_minus ** 2)
        ) / (n - 2)
        se = math.sqrt(max(var_z, 0.0))
    z = math.atanh(rc)
    return CccResult(rc, math.tanh(z - Z_975 * se), math.tanh(z + Z_975 * se), n)


def bootstrap_ccc(pred, true, n_boot: int = 1000, seed: int = 0) -> CccResult:
    """Percentile bootstrap interval; resamples without variance are skipped."""
    x, y = _validate(pred, true)
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_boot):
        idx = rng.integers(0, len(x), size=len(x))
        bx, by = x[idx], y[idx]
        if bx.var() == 0 or by.var() == 0:
            continue
        values.append(_lin_ccc(bx, by))
    rc = _lin_ccc(x, y)
    if not values:
        logger.warning("No usable bootstrap resamples; reporting a point interval")
        return CccResult(rc, rc, rc, len(x), method="bootstrap")
    lower, upper = np.percentile(values, [2.5, 97.5])
    return CccResult(rc, float(lower), float(upper), len(x), method="bootstrap")
