from typing import TYPE_CHECKING, Mapping, Optional, Union

import numpy as np

from bisformer.pkpd.integrator import integrate_case
from bisformer.pkpd.params import Drug, PdParams, PkParams
from bisformer.pkpd.patient import Patient

if TYPE_CHECKING:
    from bisformer.datapipe.schema import CaseSeries

ArrayLike = Union[float, np.ndarray]

BIN_SECONDS = 10


def response_surface_bis(ec_p: ArrayLike, ec_r: ArrayLike, pd: Optional[PdParams] = None) -> ArrayLike:
    """Additive-interaction sigmoid: BIS falls from bis0 toward bis_min as the potency sum grows."""
    pd = pd or PdParams()
    ec_p = np.asarray(ec_p, dtype=np.float64)
    ec_r = np.asarray(ec_r, dtype=np.float64)
    if np.any(ec_p < 0) or np.any(ec_r < 0):
        raise ValueError("effect-site concentrations must be non-negative")
    s = ec_r / pd.ec50r + ec_p / pd.ec50p
    s_gamma = np.power(s, pd.gamma)
    bis = pd.bis0 + (pd.bis_min - pd.bis0) * s_gamma / (1.0 + s_gamma)
    return float(bis) if bis.ndim == 0 else bis


def simulate_bis(
    p: Patient,
    rates: Mapping[Drug, np.ndarray],
    dt: float = 1.0,
    pd: Optional[PdParams] = None,
    pk_overrides: Optional[Mapping[Drug, PkParams]] = None,
) -> np.ndarray:
    """BIS after each integration step for the given per-drug rate series (ug/s)."""
    trajectories = integrate_case(p, rates, dt=dt, pk_overrides=pk_overrides)
    n = len(next(iter(trajectories.values())))
    ce_p = trajectories[Drug.PROPOFOL].ce if Drug.PROPOFOL in trajectories else np.zeros(n)
    ce_r = trajectories[Drug.REMIFENTANIL].ce if Drug.REMIFENTANIL in trajectories else np.zeros(n)
    return np.asarray(response_surface_bis(ce_p, ce_r, pd), dtype=np.float64).reshape(n)


def pkpd_pseudo_bis(
    p: Patient,
    case: "CaseSeries",
    pd: Optional[PdParams] = None,
    dt: float = 1.0,
    pk_overrides: Optional[Mapping[Drug, PkParams]] = None,
) -> np.ndarray:
    """One pseudo-BIS value per 10 s bin, taken at the end of the bin."""
    steps_per_bin = int(round(BIN_SECONDS / dt))
    if abs(steps_per_bin * dt - BIN_SECONDS) > 1e-9:
        raise ValueError(f"dt={dt} must divide the {BIN_SECONDS} s bin")
    rates = {
        drug: np.repeat(case.bin_rates(drug), steps_per_bin)
        for drug in (Drug.PROPOFOL, Drug.REMIFENTANIL)
    }
    bis = simulate_bis(p, rates, dt=dt, pd=pd, pk_overrides=pk_overrides)
    return bis[steps_per_bin - 1::steps_per_bin].copy()
