import math

import numpy as np
import pytest
from pydantic import ValidationError

from bisformer.core.errors import NegativeConcentration, NonPositiveLbm, NonPositiveParameter
from bisformer.pkpd.integrator import CompartmentState, integrate_case, integrate_compartments
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

PROPOFOL_PK = PkParams(v1=4.27, v2=18.9, v3=238.0, cl1=1.89, cl2=1.29, cl3=0.836, ke0=0.46)
STILL = RateConstants(k10=0.0, k12=0.0, k21=0.0, k13=0.0, k31=0.0)


def test_lbm_male():
    p = Patient(age=40, sex=Sex.MALE, weight=70, height=170)
    assert compute_lbm(p) == pytest.approx(55.298, abs=1e-3)


def test_lbm_female():
    p = Patient(age=40, sex=Sex.FEMALE, weight=60, height=160)
    assert compute_lbm(p) == pytest.approx(44.513, abs=1e-3)


def test_zero_weight_rejected():
    with pytest.raises(ValidationError):
        Patient(age=40, sex=Sex.MALE, weight=0, height=170)


def test_non_positive_lbm():
    p = Patient(age=40, sex=Sex.MALE, weight=150, height=100)
    with pytest.raises(NonPositiveLbm):
        compute_lbm(p)


def test_propofol_centering(reference_patient):
    pk = derive_pk_params(reference_patient, Drug.PROPOFOL)
    assert pk.v2 == pytest.approx(18.9)
    assert pk.v1 == 4.27
    assert pk.v3 == 238.0


def test_remifentanil_centering():
    p = Patient(age=40, sex=Sex.MALE, weight=70, height=170)
    pk = derive_pk_params(p, Drug.REMIFENTANIL, lbm=55.0)
    assert pk.v1 == pytest.approx(5.1)
    assert pk.ke0 == pytest.approx(0.595)


def test_remifentanil_ke0_age_60():
    p = Patient(age=60, sex=Sex.FEMALE, weight=60, height=160)
    assert derive_pk_params(p, Drug.REMIFENTANIL).ke0 == pytest.approx(0.455)


def test_reference_adult_rate_constants(reference_patient):
    pk = derive_pk_params(reference_patient, Drug.PROPOFOL, lbm=59.0)
    assert pk.cl1 == pytest.approx(1.89)
    rates = derive_rate_constants(pk)
    assert rates.k10 == pytest.approx(0.44262, abs=1e-5)
    assert rates.k13 == pytest.approx(0.19578, abs=1e-5)
    assert rates.k21 == pytest.approx(pk.cl2 / pk.v2)


def test_non_positive_parameter():
    with pytest.raises(NonPositiveParameter):
        PkParams(v1=4.27, v2=18.9, v3=238.0, cl1=1.89, cl2=0.0, cl3=0.836, ke0=0.46)


def test_scale_pk_params():
    scaled = scale_pk_params(PROPOFOL_PK, {"v1": 2.0, "ke0": 0.5})
    assert scaled.v1 == pytest.approx(8.54)
    assert scaled.ke0 == pytest.approx(0.23)
    assert scaled.cl1 == PROPOFOL_PK.cl1
    with pytest.raises(ValueError):
        scale_pk_params(PROPOFOL_PK, {"volume": 1.0})


def test_one_compartment_decay():
    rates = STILL.model_copy(update={"k10": 0.44262})
    traj = integrate_compartments(rates, PROPOFOL_PK, np.zeros(60), dt=1.0, y0=np.array([10.0, 0, 0, 0]))
    expected = 10.0 * math.exp(-0.44262)
    assert expected == pytest.approx(6.4232, abs=1e-4)
    assert traj.c1[-1] == pytest.approx(expected, rel=1e-4)


def test_effect_site_step_response():
    traj = integrate_compartments(STILL, PROPOFOL_PK, np.zeros(300), dt=1.0, y0=np.array([4.0, 0, 0, 0]))
    assert np.allclose(traj.c1, 4.0)
    assert traj.ce[-1] == pytest.approx(3.5990, rel=1e-4)


def test_state_at_reads_trajectory_rows():
    traj = integrate_compartments(STILL, PROPOFOL_PK, np.zeros(30), dt=1.0, y0=np.array([4.0, 0, 0, 0]))
    last = traj.state_at(-1)
    assert isinstance(last, CompartmentState)
    assert (last.c1, last.ce) == (traj.c1[-1], traj.ce[-1])
    np.testing.assert_array_equal(last.as_array(), traj.states[-1])


def test_zero_input_fixed_point():
    traj = integrate_compartments(derive_rate_constants(PROPOFOL_PK), PROPOFOL_PK, np.zeros(120), dt=1.0)
    assert np.all(traj.states == 0.0)


def test_mass_conservation_without_elimination():
    rates = derive_rate_constants(PROPOFOL_PK).model_copy(update={"k10": 0.0})
    y0 = np.array([10.0, 5.0, 2.0, 0.0])
    traj = integrate_compartments(rates, PROPOFOL_PK, np.zeros(10_000), dt=1.0, y0=y0)
    volumes = np.array([PROPOFOL_PK.v1, PROPOFOL_PK.v2, PROPOFOL_PK.v3])
    initial = volumes @ y0[:3]
    final = volumes @ traj.states[-1, :3]
    assert abs(final - initial) / initial < 1e-6


def test_fourth_order_convergence():
    rates = derive_rate_constants(PROPOFOL_PK)
    y0 = np.array([10.0, 0.0, 0.0, 0.0])

    def run(dt, minutes=10):
        n = int(round(minutes * 60 / dt))
        return integrate_compartments(rates, PROPOFOL_PK, np.zeros(n), dt=dt, y0=y0).states

    reference = run(0.2)
    coarse = run(20.0)
    fine = run(10.0)
    # compare at every 20 s
    ref_at = reference[99::100]
    err_coarse = np.abs(coarse - ref_at).max()
    err_fine = np.abs(fine[1::2] - ref_at).max()
    assert err_coarse / err_fine >= 8.0


def test_negative_concentration_raises(monkeypatch):
    monkeypatch.setattr("bisformer.pkpd.integrator.rk4_step", lambda f, y, h: y - 1.0)
    with pytest.raises(NegativeConcentration):
        integrate_compartments(STILL, PROPOFOL_PK, np.zeros(3), dt=1.0, y0=np.array([10.0, 0, 0, 0]))


def test_tiny_negative_is_clamped(monkeypatch):
    monkeypatch.setattr("bisformer.pkpd.integrator.rk4_step", lambda f, y, h: y - 1e-12)
    traj = integrate_compartments(STILL, PROPOFOL_PK, np.zeros(3), dt=1.0)
    assert np.all(traj.states == 0.0)


def test_integrate_case_rejects_misaligned(reference_patient):
    from bisformer.core.errors import MisalignedSeries

    with pytest.raises(MisalignedSeries):
        integrate_case(reference_patient, {Drug.PROPOFOL: np.zeros(10), Drug.REMIFENTANIL: np.zeros(11)})


def test_response_surface_examples():
    assert response_surface_bis(0.0, 0.0) == 98.0
    assert response_surface_bis(4.47, 0.0) == pytest.approx(49.0, abs=1e-9)
    s2 = response_surface_bis(2 * 4.47, 0.0)
    assert s2 == pytest.approx(98.0 / (1.0 + 2.0 ** 1.43), abs=1e-12)
    assert s2 == pytest.approx(26.526, abs=1e-3)


def test_response_surface_monotone():
    grid = np.linspace(0.0, 10.0, 41)
    for ec_r in (0.0, 5.0, 20.0):
        values = response_surface_bis(grid, np.full_like(grid, ec_r))
        assert np.all(np.diff(values) <= 0)
    values = response_surface_bis(np.full_like(grid, 2.0), grid * 4)
    assert np.all(np.diff(values) <= 0)


def test_response_surface_rejects_negative():
    with pytest.raises(ValueError):
        response_surface_bis(-1.0, 0.0)


def test_pseudo_bis_baseline(case_factory):
    case = case_factory(ppf_rate=0.0, rftn_rate=0.0, infusion_bins=(0, 0))
    pseudo = pkpd_pseudo_bis(case.patient, case)
    assert len(pseudo) == case.n_bins
    assert np.all(pseudo == 98.0)


def test_pseudo_bis_step_decreases(case_factory):
    case = case_factory(seconds=300, ppf_rate=100.0, rftn_rate=0.0, infusion_bins=(0, 30))
    pseudo = pkpd_pseudo_bis(case.patient, case)
    assert len(pseudo) == 30
    assert np.all(np.diff(pseudo) < 0)
    fine = pkpd_pseudo_bis(case.patient, case, dt=0.01)
    assert np.abs(fine - pseudo).max() < 0.05


def test_simulate_bis_identity_overrides(reference_patient):
    rates = {Drug.PROPOFOL: np.full(120, 100.0), Drug.REMIFENTANIL: np.full(120, 0.1)}
    nominal = {drug: derive_pk_params(reference_patient, drug) for drug in rates}
    assert np.array_equal(
        simulate_bis(reference_patient, rates),
        simulate_bis(reference_patient, rates, pk_overrides=nominal),
    )


def test_pd_params_validation():
    with pytest.raises(ValueError):
        PdParams(bis0=50.0, bis_min=60.0)
