import math

import numpy as np

from bisformer.core.errors import EmptyCase
from bisformer.datapipe.schema import BIN_SECONDS, CaseSeries, RawCase


def _sum_bins(per_second: np.ndarray, n_bins: int) -> np.ndarray:
    padded = np.zeros(n_bins * BIN_SECONDS)
    padded[:len(per_second)] = per_second
    return padded.reshape(n_bins, BIN_SECONDS).sum(axis=1)


def bin_case(raw: RawCase) -> CaseSeries:
    """Sum per-second doses into 10 s bins and locate the period anchors."""
    frame = raw.frame
    n = len(frame)
    if n == 0:
        raise EmptyCase(f"case {raw.case_id} has no rows", case_id=raw.case_id)
    ppf = frame["ppf_dose"].to_numpy(dtype=np.float64)
    rftn = frame["rftn_dose"].to_numpy(dtype=np.float64)
    active = np.flatnonzero(ppf > 0)
    if not len(active):
        raise EmptyCase(f"case {raw.case_id} has no propofol infusion", case_id=raw.case_id)

    n_bins = math.ceil(n / BIN_SECONDS)
    return CaseSeries(
        case_id=raw.case_id,
        patient=raw.patient,
        ppf_dose=_sum_bins(ppf, n_bins),
        rftn_dose=_sum_bins(rftn, n_bins),
        bis=frame["bis"].to_numpy(dtype=np.float64).copy(),
        t_induction_start=int(active[0]),
        t_propofol_stop=int(active[-1]),
        t_end=n - 1,
        t_origin=float(frame["t"].iloc[0]),
    )
