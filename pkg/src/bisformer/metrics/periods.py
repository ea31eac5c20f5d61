from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel

from bisformer.core.errors import MissingAnchor

INDUCTION_SECONDS = 600
PERIODS = ("induction", "maintenance", "recovery")


class PeriodSplit(BaseModel):
    """Induction and maintenance are half-open; recovery includes t_end."""

    induction: Tuple[int, int]
    maintenance: Tuple[int, int]
    recovery: Tuple[int, int]

    model_config = {"frozen": True}

    @property
    def maintenance_empty(self) -> bool:
        lo, hi = self.maintenance
        return hi <= lo

    @classmethod
    def from_anchors(cls, t0: int, t_stop: int, t_end: int) -> "PeriodSplit":
        if not 0 <= t0 <= t_stop <= t_end:
            raise MissingAnchor(
                "anchors must satisfy 0 <= induction start <= propofol stop <= end",
                t0=t0, t_stop=t_stop, t_end=t_end,
            )
        induction_end = min(t0 + INDUCTION_SECONDS, t_stop)
        return cls(
            induction=(t0, induction_end),
            maintenance=(induction_end, t_stop),
            recovery=(t_stop, t_end),
        )

    def mask(self, times: np.ndarray, period: str) -> np.ndarray:
        times = np.asarray(times)
        if period == "overall":
            return (times >= self.induction[0]) & (times <= self.recovery[1])
        lo, hi = getattr(self, period)
        if period == "recovery":
            return (times >= lo) & (times <= hi)
        return (times >= lo) & (times < hi)

    def masks(self, times: np.ndarray) -> Dict[str, np.ndarray]:
        return {name: self.mask(times, name) for name in PERIODS + ("overall",)}


def split_periods(case) -> PeriodSplit:
    """Periods of a binned case from its propofol anchors."""
    anchors = [getattr(case, name, None) for name in ("t_induction_start", "t_propofol_stop", "t_end")]
    if any(a is None for a in anchors):
        raise MissingAnchor(f"case {getattr(case, 'case_id', '?')} lacks period anchors")
    return PeriodSplit.from_anchors(*(int(a) for a in anchors))
