from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from bisformer.core.errors import MisalignedSeries, NegativeConcentration
from bisformer.pkpd.params import Drug, PkParams, RateConstants, derive_pk_params, derive_rate_constants
from bisformer.pkpd.patient import Patient

CLAMP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CompartmentState:
    c1: float
    c2: float
    c3: float
    ce: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3, self.ce], dtype=np.float64)


@dataclass(frozen=True)
class CompartmentTrajectory:
    """States after each step; row k is the state at time (k + 1) * dt."""

    states: np.ndarray
    dt: float

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def c1(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def c2(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def c3(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def ce(self) -> np.ndarray:
        return self.states[:, 3]

    def state_at(self, k: int) -> CompartmentState:
        return CompartmentState(*(float(v) for v in self.states[k]))


def rk4_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0


def _system_matrix(rates: RateConstants, v1: float, v2: float, v3: float, ke0: float) -> np.ndarray:
    # concentrations form; V-weighted exchange terms divided through by the target volume
    return np.array(
        [
            [-(rates.k10 + rates.k12 + rates.k13), v2 * rates.k21 / v1, v3 * rates.k31 / v1, 0.0],
            [v1 * rates.k12 / v2, -rates.k21, 0.0, 0.0],
            [v1 * rates.k13 / v3, 0.0, -rates.k31, 0.0],
            [ke0, 0.0, 0.0, -ke0],
        ],
        dtype=np.float64,
    )


def integrate_compartments(
    rates: RateConstants,
    pk: PkParams,
    amount_per_min: np.ndarray,
    dt: float,
    y0: Optional[np.ndarray] = None,
) -> CompartmentTrajectory:
    """Fixed-step RK4 over the mammillary three-compartment model plus effect site.

    `amount_per_min` holds the drug input of each step (zero-order hold), in amount/min.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = np.asarray(amount_per_min, dtype=np.float64)
    if u.ndim != 1:
        raise MisalignedSeries("infusion series must be one-dimensional")
    if np.any(u < 0):
        raise ValueError("infusion rates must be non-negative")

    a = _system_matrix(rates, pk.v1, pk.v2, pk.v3, pk.ke0)
    b = np.array([1.0 / pk.v1, 0.0, 0.0, 0.0])
    h = dt / 60.0
    y = np.zeros(4) if y0 is None else np.asarray(y0, dtype=np.float64).copy()
    out = np.empty((u.shape[0], 4), dtype=np.float64)

    for k, u_k in enumerate(u):
        drive = b * u_k
        y = rk4_step(lambda s: a @ s + drive, y, h)
        low = y.min()
        if low < 0:
            if low < -CLAMP_TOLERANCE:
                raise NegativeConcentration(
                    f"concentration {low:.3e} at step {k}; dt={dt}s is too large",
                    step=k, dt=dt,
                )
            np.maximum(y, 0.0, out=y)
        out[k] = y
    return CompartmentTrajectory(states=out, dt=dt)


def integrate_case(
    p: Patient,
    infusion: Mapping[Drug, np.ndarray],
    dt: float = 1.0,
    pk_overrides: Optional[Mapping[Drug, PkParams]] = None,
) -> Dict[Drug, CompartmentTrajectory]:
    """Integrate each drug's compartments from its rate series (ug/s sampled every dt seconds)."""
    lengths = {drug: len(series) for drug, series in infusion.items()}
    if len(set(lengths.values())) > 1:
        raise MisalignedSeries(f"infusion series lengths differ: {lengths}")

    pk_overrides = pk_overrides or {}
    trajectories: Dict[Drug, CompartmentTrajectory] = {}
    for drug, series in infusion.items():
        pk = pk_overrides.get(drug) or derive_pk_params(p, drug)
        rates = np.asarray(series, dtype=np.float64)
        trajectories[drug] = integrate_compartments(
            derive_rate_constants(pk), pk, rates * 60.0 * drug.amount_per_ug, dt
        )
    return trajectories
