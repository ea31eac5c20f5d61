import math

import numpy as np

from bisformer.core.errors import SeriesTooShort

MIN_WINDOW = 3


def lowess_smooth(values, frac: float = 0.03) -> np.ndarray:
    """Single-pass local linear smoother on an evenly spaced series.

    Each point is fitted from its ceil(frac * n) nearest neighbours (at least 3)
    with tricube weights scaled by the farthest neighbour's distance.
    """
    y = np.asarray(values, dtype=np.float64)
    n = len(y)
    if n < MIN_WINDOW:
        raise SeriesTooShort(f"LOWESS needs at least {MIN_WINDOW} points, got {n}", length=n)
    if not 0 < frac <= 1:
        raise ValueError("frac must lie in (0, 1]")
    k = min(n, max(MIN_WINDOW, math.ceil(frac * n)))

    positions = np.arange(n)
    lo = np.clip(positions - k // 2, 0, n - k)
    index = lo[:, None] + np.arange(k)[None, :]
    x = index.astype(np.float64)
    dist = np.abs(x - positions[:, None])
    bandwidth = dist.max(axis=1, keepdims=True)
    w = np.clip(1.0 - (dist / bandwidth) ** 3, 0.0, None) ** 3

    yw = y[index]
    sw = w.sum(axis=1)
    x_mean = (w * x).sum(axis=1) / sw
    y_mean = (w * yw).sum(axis=1) / sw
    dx = x - x_mean[:, None]
    sxx = (w * dx * dx).sum(axis=1)
    sxy = (w * dx * (yw - y_mean[:, None])).sum(axis=1)
    slope = np.divide(sxy, sxx, out=np.zeros(n), where=sxx > 0)
    return y_mean + slope * (positions - x_mean)
