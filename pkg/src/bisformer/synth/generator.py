"""Synthetic surgical cases: sampled patients, TCI-driven infusions and PK-PD BIS."""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from bisformer.core.config import SynthConfig
from bisformer.datapipe.schema import BIN_SECONDS, DoseMode, case_header
from bisformer.pkpd.integrator import CompartmentState, integrate_compartments
from bisformer.pkpd.params import (
    Drug,
    PdParams,
    PkParams,
    derive_pk_params,
    derive_rate_constants,
    scale_pk_params,
)
from bisformer.pkpd.patient import Patient, Sex
from bisformer.pkpd.response import simulate_bis
from bisformer.utils.files import write_text_atomic

logger = logging.getLogger(__name__)

TCI_TIME_CONSTANT_MIN = 0.5
MAX_RATE_UG_S = {Drug.PROPOFOL: 4000.0, Drug.REMIFENTANIL: 10.0}
MAINTENANCE_BIS_RANGE = (36.0, 44.0)
REMIFENTANIL_TARGET_RANGE = (3.0, 6.0)
SEGMENT_SECONDS_RANGE = (600, 1200)
LEAD_IN_SECONDS_RANGE = (60, 120)
RECOVERY_SECONDS_RANGE = (600, 900)
TAPER_SECONDS = 300
TAPER_FLOOR = 0.4


@dataclass
class GeneratedCase:
    case_id: str
    patient: Patient
    rates: Dict[Drug, np.ndarray]
    bis: np.ndarray
    factors: Dict[str, Dict[str, float]]
    t_propofol_stop: int

    @property
    def duration(self) -> int:
        return len(self.bis)

    def to_frame(self) -> pd.DataFrame:
        # rates are ug/s on a 1 s grid, so per-second doses equal the rates
        return pd.DataFrame({
            "t": np.arange(self.duration),
            "ppf_dose": self.rates[Drug.PROPOFOL],
            "rftn_dose": self.rates[Drug.REMIFENTANIL],
            "bis": self.bis,
        })


def case_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])


def _clipped_normal(rng: np.random.Generator, mean_sd: Tuple[float, float], bounds: Tuple[float, float]) -> float:
    return float(np.clip(rng.normal(*mean_sd), *bounds))


def sample_patient(rng: np.random.Generator, cfg: SynthConfig) -> Patient:
    return Patient(
        age=int(round(_clipped_normal(rng, cfg.age_mean_sd, cfg.age_range))),
        sex=Sex.MALE if rng.random() < cfg.male_fraction else Sex.FEMALE,
        weight=round(_clipped_normal(rng, cfg.weight_mean_sd, cfg.weight_range), 1),
        height=round(_clipped_normal(rng, cfg.height_mean_sd, cfg.height_range), 1),
    )


def sample_factors(rng: np.random.Generator, cfg: SynthConfig) -> Dict[str, float]:
    lo, hi = cfg.perturbation_range
    return {name: float(rng.uniform(lo, hi)) for name in PkParams.model_fields}


def plasma_target_for_bis(bis: float, remifentanil_ng_ml: float, pd: PdParams) -> float:
    """Propofol plasma target (ug/mL) that yields `bis` at steady state with the given opioid level."""
    potency = ((pd.bis0 - bis) / (bis - pd.bis_min)) ** (1.0 / pd.gamma)
    return max(0.0, pd.ec50p * (potency - remifentanil_ng_ml / pd.ec50r))


class TciPump:
    """Plasma-targeting controller driving a nominal model in fixed 10 s blocks."""

    def __init__(self, pk: PkParams, drug: Drug):
        self.pk = pk
        self.drug = drug
        self.rates = derive_rate_constants(pk)
        self.state = CompartmentState(0.0, 0.0, 0.0, 0.0)

    def rate_for(self, target: float) -> float:
        """Infusion rate (ug/s) that moves C1 toward `target` with a first-order response."""
        c1, c2, c3 = self.state.c1, self.state.c2, self.state.c3
        pk = self.pk
        amount_per_min = (
            pk.cl1 * c1 + pk.cl2 * (c1 - c2) + pk.cl3 * (c1 - c3)
            + pk.v1 * (target - c1) / TCI_TIME_CONSTANT_MIN
        )
        rate = amount_per_min / 60.0 / self.drug.amount_per_ug
        return float(np.clip(rate, 0.0, MAX_RATE_UG_S[self.drug]))

    def advance(self, rate_ug_s: float, seconds: int) -> None:
        amount = np.full(seconds, rate_ug_s * 60.0 * self.drug.amount_per_ug)
        trajectory = integrate_compartments(self.rates, self.pk, amount, dt=1.0, y0=self.state.as_array())
        self.state = trajectory.state_at(-1)


def _schedule(rng: np.random.Generator, cfg: SynthConfig) -> Tuple[int, int, int, List[Tuple[int, float]]]:
    lo, hi = cfg.duration_range
    duration = int(rng.integers(lo // BIN_SECONDS, hi // BIN_SECONDS + 1)) * BIN_SECONDS
    lead_in = int(rng.integers(LEAD_IN_SECONDS_RANGE[0] // BIN_SECONDS, LEAD_IN_SECONDS_RANGE[1] // BIN_SECONDS + 1)) * BIN_SECONDS
    recovery = int(rng.integers(
        RECOVERY_SECONDS_RANGE[0] // BIN_SECONDS, RECOVERY_SECONDS_RANGE[1] // BIN_SECONDS + 1
    )) * BIN_SECONDS
    t_stop = duration - recovery
    segments: List[Tuple[int, float]] = []
    t = lead_in
    while t < t_stop:
        segments.append((t, float(rng.uniform(*MAINTENANCE_BIS_RANGE))))
        t += int(rng.integers(SEGMENT_SECONDS_RANGE[0], SEGMENT_SECONDS_RANGE[1] + 1))
    return duration, lead_in, t_stop, segments


def _target_bis(t: int, segments: Sequence[Tuple[int, float]]) -> float:
    current = segments[0][1]
    for start, value in segments:
        if start <= t:
            current = value
    return current


def generate_case(cfg: SynthConfig, index: int, pd: Optional[PdParams] = None) -> GeneratedCase:
    """One case; depends only on (cfg.seed, index), so cases can be generated in any order."""
    pd = pd or PdParams()
    rng = case_rng(cfg.seed, index)
    patient = sample_patient(rng, cfg)
    factors = {drug: sample_factors(rng, cfg) for drug in (Drug.PROPOFOL, Drug.REMIFENTANIL)}
    remi_target = float(rng.uniform(*REMIFENTANIL_TARGET_RANGE))
    duration, lead_in, t_stop, segments = _schedule(rng, cfg)

    nominal = {drug: derive_pk_params(patient, drug) for drug in factors}
    pumps = {drug: TciPump(pk, drug) for drug, pk in nominal.items()}
    n_blocks = math.ceil(duration / BIN_SECONDS)
    block_rates = {drug: np.zeros(n_blocks) for drug in pumps}

    for j in range(n_blocks):
        t = j * BIN_SECONDS
        if lead_in <= t < t_stop:
            taper = 1.0
            if t >= t_stop - TAPER_SECONDS:
                taper = 1.0 - (1.0 - TAPER_FLOOR) * (t - (t_stop - TAPER_SECONDS)) / TAPER_SECONDS
            targets = {
                Drug.PROPOFOL: taper * plasma_target_for_bis(_target_bis(t, segments), remi_target, pd),
                Drug.REMIFENTANIL: remi_target,
            }
            for drug, pump in pumps.items():
                block_rates[drug][j] = pump.rate_for(targets[drug])
        for drug, pump in pumps.items():
            pump.advance(block_rates[drug][j], BIN_SECONDS)

    rates = {drug: np.repeat(r, BIN_SECONDS)[:duration] for drug, r in block_rates.items()}
    true_pk = {drug: scale_pk_params(nominal[drug], factors[drug]) for drug in nominal}
    bis = simulate_bis(patient, rates, dt=1.0, pd=pd, pk_overrides=true_pk)
    if cfg.noise_sd > 0:
        bis = bis + rng.normal(0.0, cfg.noise_sd, size=bis.shape)
    bis = np.clip(bis, 0.0, 100.0)
    return GeneratedCase(
        case_id=f"case_{index:04d}",
        patient=patient,
        rates=rates,
        bis=bis,
        factors={drug.value: f for drug, f in factors.items()},
        t_propofol_stop=t_stop,
    )


def generate_case_set(cfg: SynthConfig, pd: Optional[PdParams] = None) -> List[GeneratedCase]:
    cases = [generate_case(cfg, i, pd) for i in range(cfg.n_cases)]
    logger.info(f"Generated {len(cases)} synthetic cases (seed {cfg.seed})")
    return cases


def case_csv_text(case: GeneratedCase) -> str:
    header = "\n".join(case_header(case.case_id, case.patient, DoseMode.PER_SECOND))
    return header + "\n" + case.to_frame().to_csv(index=False, lineterminator="\n")


def write_case_csv(case: GeneratedCase, out_dir: Union[str, Path]) -> Path:
    return write_text_atomic(Path(out_dir) / f"{case.case_id}.csv", case_csv_text(case))
