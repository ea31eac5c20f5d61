from pathlib import Path

import numpy as np
import pytest

from bisformer.core.config import ModelConfig, SynthConfig
from bisformer.datapipe.schema import BIN_SECONDS, CaseSeries
from bisformer.pkpd.patient import Patient, Sex


@pytest.fixture
def reference_patient():
    return Patient(age=53, sex=Sex.MALE, weight=77.0, height=177.0)


@pytest.fixture
def tiny_config():
    return ModelConfig(
        lstm_hidden=4,
        grn_hidden=4,
        num_heads=2,
        bottleneck_widths=[4, 4, 1],
        sequence_length=8,
    )


@pytest.fixture
def tiny_synth_config():
    return SynthConfig(n_cases=4, duration_range=(1800, 1800), seed=7, noise_sd=1.0)


def make_case(
    case_id: str = "c1",
    seconds: int = 600,
    ppf_rate: float = 100.0,
    rftn_rate: float = 0.1,
    infusion_bins=(0, 30),
    bis=None,
    patient: Patient = None,
) -> CaseSeries:
    """A binned case with constant infusions over `infusion_bins` and the given BIS."""
    n_bins = int(np.ceil(seconds / BIN_SECONDS))
    ppf = np.zeros(n_bins)
    rftn = np.zeros(n_bins)
    lo, hi = infusion_bins
    ppf[lo:hi] = ppf_rate * BIN_SECONDS
    rftn[lo:hi] = rftn_rate * BIN_SECONDS
    if bis is None:
        bis = np.linspace(95.0, 40.0, seconds)
    return CaseSeries(
        case_id=case_id,
        patient=patient or Patient(age=53, sex=Sex.MALE, weight=77.0, height=177.0),
        ppf_dose=ppf,
        rftn_dose=rftn,
        bis=np.asarray(bis, dtype=np.float64),
        t_induction_start=lo * BIN_SECONDS,
        t_propofol_stop=max(hi * BIN_SECONDS - 1, lo * BIN_SECONDS),
        t_end=seconds - 1,
    )


@pytest.fixture
def case_factory():
    return make_case


def write_case_file(path: Path, rows, case_id="case_x", header=None) -> Path:
    """Write a case CSV; rows are (t, ppf_dose, rftn_dose, bis) with None for blanks."""
    header = header if header is not None else [
        f"# case_id: {case_id}",
        "# age: 53",
        "# sex: male",
        "# weight: 77.0",
        "# height: 177.0",
        "# dose_mode: per_second",
    ]
    body = ["t,ppf_dose,rftn_dose,bis"]
    for row in rows:
        body.append(",".join("" if v is None else repr(v) for v in row))
    path.write_text("\n".join(header + body) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def case_file_writer():
    return write_case_file
