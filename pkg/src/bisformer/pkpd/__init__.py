from bisformer.pkpd.integrator import (
    CompartmentState,
    CompartmentTrajectory,
    integrate_case,
    integrate_compartments,
    rk4_step,
)
from bisformer.pkpd.params import (
    Drug,
    PdParams,
    PkParams,
    RateConstants,
    derive_pk_params,
    derive_rate_constants,
    scale_pk_params,
)
from bisformer.pkpd.patient import Patient, Sex, compute_lbm
from bisformer.pkpd.response import pkpd_pseudo_bis, response_surface_bis, simulate_bis

__all__ = [
    "CompartmentState",
    "CompartmentTrajectory",
    "Drug",
    "Patient",
    "PdParams",
    "PkParams",
    "RateConstants",
    "Sex",
    "compute_lbm",
    "derive_pk_params",
    "derive_rate_constants",
    "integrate_case",
    "integrate_compartments",
    "pkpd_pseudo_bis",
    "response_surface_bis",
    "rk4_step",
    "scale_pk_params",
    "simulate_bis",
]
