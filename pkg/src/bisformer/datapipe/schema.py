from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from bisformer.core.errors import MisalignedSeries
from bisformer.pkpd.params import Drug
from bisformer.pkpd.patient import Patient

BIN_SECONDS = 10
WINDOW_BINS = 180
CASE_COLUMNS = ("t", "ppf_dose", "rftn_dose", "bis")


class DoseMode(str, Enum):
    PER_SECOND = "per_second"
    CUMULATIVE = "cumulative"


@dataclass
class RawCase:
    """A cleaned per-second record: one row per second, no gaps, doses in ug per second."""

    case_id: str
    patient: Patient
    frame: pd.DataFrame
    dose_mode: DoseMode = DoseMode.PER_SECOND

    def __len__(self) -> int:
        return len(self.frame)


@dataclass
class CaseSeries:
    """A binned case. Doses are per 10 s bin (ug); BIS stays per second.

    Anchors are seconds relative to the first record row.
    """

    case_id: str
    patient: Patient
    ppf_dose: np.ndarray
    rftn_dose: np.ndarray
    bis: np.ndarray
    t_induction_start: int
    t_propofol_stop: int
    t_end: int
    t_origin: float = 0.0

    def __post_init__(self) -> None:
        if len(self.ppf_dose) != len(self.rftn_dose):
            raise MisalignedSeries(
                "propofol and remifentanil bins differ in length",
                propofol=len(self.ppf_dose), remifentanil=len(self.rftn_dose),
            )
        if not self.t_induction_start <= self.t_propofol_stop <= self.t_end:
            raise ValueError("anchors must satisfy induction start <= propofol stop <= end")

    @property
    def n_bins(self) -> int:
        return len(self.ppf_dose)

    @property
    def duration(self) -> int:
        return len(self.bis)

    def bin_doses(self, drug: Drug) -> np.ndarray:
        return self.ppf_dose if drug is Drug.PROPOFOL else self.rftn_dose

    def bin_rates(self, drug: Drug) -> np.ndarray:
        """ug/s per bin."""
        return self.bin_doses(drug) / BIN_SECONDS

    def rates_per_second(self, drug: Drug) -> np.ndarray:
        return np.repeat(self.bin_rates(drug), BIN_SECONDS)

    def bins_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bin": np.arange(self.n_bins),
            "t_start": np.arange(self.n_bins) * BIN_SECONDS,
            "ppf_dose": self.ppf_dose,
            "rftn_dose": self.rftn_dose,
            "ppf_rate": self.bin_rates(Drug.PROPOFOL),
            "rftn_rate": self.bin_rates(Drug.REMIFENTANIL),
        })


class Normalization(BaseModel):
    """Per-feature mean/scale computed on the training split."""

    ppf_mean: float
    ppf_scale: float = Field(..., gt=0)
    rftn_mean: float
    rftn_scale: float = Field(..., gt=0)
    bis_mean: float
    bis_scale: float = Field(..., gt=0)
    static_mean: List[float]
    static_scale: List[float]

    def drug(self, ppf_rates: np.ndarray, rftn_rates: np.ndarray) -> np.ndarray:
        return np.stack(
            [(ppf_rates - self.ppf_mean) / self.ppf_scale, (rftn_rates - self.rftn_mean) / self.rftn_scale],
            axis=-1,
        )

    def bis(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.bis_mean) / self.bis_scale

    def statics(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=np.float64) - np.asarray(self.static_mean)) / np.asarray(self.static_scale)


@dataclass
class TrainingSample:
    case_id: str
    t: int
    x_drug: np.ndarray
    x_pseudo: np.ndarray
    statics: np.ndarray
    y_history: np.ndarray
    y_target: float
    weight: float = 1.0


@dataclass
class SampleBatch:
    """Column-stacked samples. Inputs are normalized; y_history/y_target stay in BIS units."""

    x_drug: np.ndarray
    x_pseudo: np.ndarray
    statics: np.ndarray
    y_history: np.ndarray
    y_target: np.ndarray
    weight: np.ndarray
    case_ids: np.ndarray = field(default_factory=lambda: np.array([], dtype=object))
    times: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))

    def __post_init__(self) -> None:
        n = len(self.y_target)
        if not len(self.case_ids):
            self.case_ids = np.array([""] * n, dtype=object)
        if not len(self.times):
            self.times = np.zeros(n, dtype=np.int64)
        lengths = {len(a) for a in (self.x_drug, self.x_pseudo, self.statics, self.y_history,
                                    self.weight, self.case_ids, self.times)}
        if lengths != {n}:
            raise MisalignedSeries("sample batch columns differ in length", lengths=sorted(lengths | {n}))

    def __len__(self) -> int:
        return len(self.y_target)

    @property
    def steps(self) -> int:
        return self.x_pseudo.shape[1]

    def take(self, index) -> "SampleBatch":
        return SampleBatch(
            self.x_drug[index], self.x_pseudo[index], self.statics[index], self.y_history[index],
            self.y_target[index], self.weight[index], self.case_ids[index], self.times[index],
        )

    def sample(self, i: int) -> TrainingSample:
        return TrainingSample(
            str(self.case_ids[i]), int(self.times[i]), self.x_drug[i], self.x_pseudo[i], self.statics[i],
            self.y_history[i], float(self.y_target[i]), float(self.weight[i]),
        )

    def with_weights(self, weight: np.ndarray) -> "SampleBatch":
        return SampleBatch(
            self.x_drug, self.x_pseudo, self.statics, self.y_history, self.y_target,
            np.asarray(weight, dtype=np.float64), self.case_ids, self.times,
        )

    @classmethod
    def from_samples(cls, samples: Sequence[TrainingSample]) -> "SampleBatch":
        if not samples:
            return cls.empty()
        return cls(
            np.stack([s.x_drug for s in samples]),
            np.stack([s.x_pseudo for s in samples]),
            np.stack([s.statics for s in samples]),
            np.stack([s.y_history for s in samples]),
            np.array([s.y_target for s in samples], dtype=np.float64),
            np.array([s.weight for s in samples], dtype=np.float64),
            np.array([s.case_id for s in samples], dtype=object),
            np.array([s.t for s in samples], dtype=np.int64),
        )

    @classmethod
    def concat(cls, batches: Sequence["SampleBatch"]) -> "SampleBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, name) for b in batches]) for name in _COLUMNS))

    @classmethod
    def empty(cls, steps: int = WINDOW_BINS, static_dim: int = 4) -> "SampleBatch":
        return cls(
            np.zeros((0, steps, 2)), np.zeros((0, steps)), np.zeros((0, static_dim)), np.zeros((0, steps)),
            np.zeros(0), np.zeros(0), np.array([], dtype=object), np.array([], dtype=np.int64),
        )


_COLUMNS = ("x_drug", "x_pseudo", "statics", "y_history", "y_target", "weight", "case_ids", "times")


def case_header(case_id: str, patient: Patient, dose_mode: DoseMode = DoseMode.PER_SECOND) -> List[str]:
    """The `#` header block of a case CSV."""
    return [
        f"# case_id: {case_id}",
        f"# age: {patient.age}",
        f"# sex: {patient.sex.value}",
        f"# weight: {patient.weight!r}",
        f"# height: {patient.height!r}",
        f"# dose_mode: {dose_mode.value}",
    ]

