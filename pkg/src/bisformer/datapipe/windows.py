from typing import Optional, Sequence

import numpy as np

from bisformer.core.errors import MisalignedSeries, MissingNorms, WindowExceedsSeries
from bisformer.datapipe.schema import (
    BIN_SECONDS,
    WINDOW_BINS,
    CaseSeries,
    Normalization,
    SampleBatch,
    TrainingSample,
)
from bisformer.imbalance.lds import WeightTable
from bisformer.pkpd.params import Drug, PdParams


def _moments(values: np.ndarray, axis: int = 0):
    mean = values.mean(axis=axis)
    scale = values.std(axis=axis)
    return mean, np.where(scale > 0, scale, 1.0)


def compute_norms(cases: Sequence[CaseSeries]) -> Normalization:
    """Feature statistics over the training cases (population standard deviation)."""
    if not cases:
        raise MissingNorms("normalization needs at least one training case")
    ppf_mean, ppf_scale = _moments(np.concatenate([c.bin_rates(Drug.PROPOFOL) for c in cases]))
    rftn_mean, rftn_scale = _moments(np.concatenate([c.bin_rates(Drug.REMIFENTANIL) for c in cases]))
    bis_mean, bis_scale = _moments(np.concatenate([c.bis for c in cases]))
    static_mean, static_scale = _moments(np.stack([c.patient.static_vector() for c in cases]))
    return Normalization(
        ppf_mean=float(ppf_mean),
        ppf_scale=float(ppf_scale),
        rftn_mean=float(rftn_mean),
        rftn_scale=float(rftn_scale),
        bis_mean=float(bis_mean),
        bis_scale=float(bis_scale),
        static_mean=static_mean.tolist(),
        static_scale=static_scale.tolist(),
    )


def sample_times(case: CaseSeries, stride: int = 1, start: int = 1) -> np.ndarray:
    if stride < 1:
        raise ValueError("sample stride must be at least 1")
    return np.arange(start, case.duration, stride, dtype=np.int64)


def build_windows(
    case: CaseSeries,
    pseudo_bis: np.ndarray,
    norms: Optional[Normalization],
    table: Optional[WeightTable] = None,
    labels: Optional[np.ndarray] = None,
    stride: int = 1,
    times: Optional[np.ndarray] = None,
    window_bins: int = WINDOW_BINS,
    baseline_bis: float = PdParams().bis0,
) -> SampleBatch:
    """One sample per prediction second t.

    The window holds the `window_bins` bins completed before t; missing leading bins
    are zero infusion, `baseline_bis` pseudo-BIS and the first recorded BIS. The
    target is the label at second t.
    """
    if norms is None:
        raise MissingNorms(f"no normalization constants for case {case.case_id}", case_id=case.case_id)
    if len(pseudo_bis) != case.n_bins:
        raise MisalignedSeries(
            "pseudo-BIS must have one value per bin", bins=case.n_bins, pseudo=len(pseudo_bis)
        )
    labels = case.bis if labels is None else np.asarray(labels, dtype=np.float64)
    if len(labels) != case.duration:
        raise MisalignedSeries("labels must have one value per second", seconds=case.duration, labels=len(labels))
    times = sample_times(case, stride) if times is None else np.asarray(times, dtype=np.int64)
    if len(times) and (times.min() < 0 or times.max() >= case.duration):
        raise WindowExceedsSeries(f"prediction times outside [0, {case.duration})", case_id=case.case_id)

    # per-bin features with `window_bins` padding rows in front
    pad_rates = np.zeros(window_bins)
    rates = norms.drug(
        np.concatenate([pad_rates, case.bin_rates(Drug.PROPOFOL)]),
        np.concatenate([pad_rates, case.bin_rates(Drug.REMIFENTANIL)]),
    )
    pseudo = norms.bis(np.concatenate([np.full(window_bins, baseline_bis), pseudo_bis]))
    bin_ends = np.minimum(np.arange(case.n_bins) * BIN_SECONDS + BIN_SECONDS - 1, case.duration - 1)
    history = np.concatenate([np.full(window_bins, labels[0]), labels[bin_ends]])

    completed = times // BIN_SECONDS
    index = completed[:, None] + np.arange(window_bins)[None, :]
    n = len(times)
    statics = np.repeat(norms.statics(case.patient.static_vector())[None, :], n, axis=0)
    targets = labels[times]
    weight = table.lookup(targets) if table is not None else np.ones(n)
    return SampleBatch(
        x_drug=rates[index],
        x_pseudo=pseudo[index],
        statics=statics,
        y_history=history[index],
        y_target=targets.astype(np.float64),
        weight=np.asarray(weight, dtype=np.float64),
        case_ids=np.array([case.case_id] * n, dtype=object),
        times=times,
    )


def window_at(
    case: CaseSeries,
    pseudo_bis: np.ndarray,
    norms: Normalization,
    t: int,
    window_bins: int = WINDOW_BINS,
) -> TrainingSample:
    batch = build_windows(case, pseudo_bis, norms, times=np.array([t]), window_bins=window_bins)
    return batch.sample(0)
