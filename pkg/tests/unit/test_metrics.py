import math

import numpy as np
import pandas as pd
import pytest

from bisformer.core.errors import DegenerateSeries, MisalignedSeries, MissingAnchor, WindowExceedsSeries, ZeroTrueValue
from bisformer.imbalance.lds import smooth_density, weights_from_density
from bisformer.metrics.agreement import bootstrap_ccc, ccc, ccc_value
from bisformer.metrics.binned import (
    MUTATION_MAGNITUDES,
    binned_test_error,
    error_reduction,
    maintenance_mutation_stats,
    mutation_stats,
)
from bisformer.metrics.clinical import case_metrics, cohort_summary, performance_errors, period_metrics
from bisformer.metrics.periods import PeriodSplit, split_periods
from bisformer.metrics.reports import (
    binned_error_frame,
    ccc_table,
    error_reduction_frame,
    mutation_frame,
    summary_table,
)


# periods

def test_period_boundaries():
    split = PeriodSplit.from_anchors(0, 3600, 4200)
    assert split.induction == (0, 600)
    assert split.maintenance == (600, 3600)
    assert split.recovery == (3600, 4200)
    times = np.array([0, 599, 600, 3599, 3600, 4200])
    assert split.mask(times, "induction").tolist() == [True, True, False, False, False, False]
    assert split.mask(times, "maintenance").tolist() == [False, False, True, True, False, False]
    assert split.mask(times, "recovery").tolist() == [False, False, False, False, True, True]
    assert split.mask(times, "overall").all()


def test_short_case_has_empty_maintenance():
    split = PeriodSplit.from_anchors(100, 400, 900)
    assert split.induction == (100, 400)
    assert split.maintenance_empty


def test_periods_from_case(case_factory):
    case = case_factory(seconds=1800, infusion_bins=(3, 150))
    split = split_periods(case)
    assert split.induction == (30, 630)
    assert split.recovery == (1499, 1799)


def test_bad_anchors():
    with pytest.raises(MissingAnchor):
        PeriodSplit.from_anchors(500, 100, 900)
    with pytest.raises(MissingAnchor):
        split_periods(object())


# clinical metrics

def test_clinical_example():
    m = period_metrics([44, 38, 60], [40, 40, 50])
    assert performance_errors([44, 38, 60], [40, 40, 50]).tolist() == pytest.approx([10.0, -5.0, 20.0])
    assert m.mdpe == pytest.approx(10.0)
    assert m.mdape == pytest.approx(10.0)
    assert m.rmse == pytest.approx(6.3246, abs=1e-4)
    assert m.n == 3


def test_mdpe_flips_sign_when_errors_are_reflected():
    rng = np.random.default_rng(6)
    true = rng.uniform(20.0, 90.0, 41)
    pred = true + rng.normal(3.0, 6.0, 41)
    mirrored = 2.0 * true - pred
    a, b = period_metrics(pred, true), period_metrics(mirrored, true)
    assert b.mdpe == pytest.approx(-a.mdpe, abs=1e-9)
    assert b.mdape == pytest.approx(a.mdape, abs=1e-9)
    assert b.rmse == pytest.approx(a.rmse, abs=1e-9)


def test_perfect_prediction_metrics():
    m = period_metrics([40, 50, 60], [40, 50, 60])
    assert (m.mdpe, m.mdape, m.rmse) == (0.0, 0.0, 0.0)


def test_rmse_is_homogeneous():
    true = np.array([40.0, 50.0, 60.0, 45.0])
    pred = true + np.array([1.0, -2.0, 3.0, 0.5])
    assert period_metrics(true + 2 * (pred - true), true).rmse == pytest.approx(2 * period_metrics(pred, true).rmse)


def test_zero_truth_is_rejected():
    with pytest.raises(ZeroTrueValue):
        performance_errors([1.0, 2.0], [0.0, 2.0])
    with pytest.raises(MisalignedSeries):
        performance_errors([1.0], [1.0, 2.0])


def test_empty_period_is_nan():
    m = period_metrics([], [])
    assert m.n == 0
    assert math.isnan(m.rmse)


def test_case_metrics_per_period():
    split = PeriodSplit.from_anchors(0, 20, 29)
    times = np.arange(30)
    true = np.full(30, 50.0)
    pred = true.copy()
    pred[20:] += 5.0
    metrics = case_metrics(pred, true, split, times)
    assert set(metrics.periods) == {"induction", "maintenance", "recovery", "overall"}
    assert metrics.periods["induction"].rmse == 0.0
    assert metrics.periods["maintenance"].n == 0
    assert metrics.periods["recovery"].rmse == pytest.approx(5.0)
    assert metrics.overall.n == 30
    rows = metrics.to_rows("c1", "model")
    assert {r["period"] for r in rows} == set(metrics.periods)
    assert all(r["case_id"] == "c1" and r["method"] == "model" for r in rows)


def test_case_metrics_without_split():
    metrics = case_metrics([44, 38, 60], [40, 40, 50])
    assert list(metrics.periods) == ["overall"]


def test_cohort_summary():
    rows = pd.DataFrame([
        {"case_id": "a", "method": "m", "period": "overall", "mdpe": 1.0, "mdape": 2.0, "rmse": 3.0, "n": 10},
        {"case_id": "b", "method": "m", "period": "overall", "mdpe": 3.0, "mdape": 4.0, "rmse": 5.0, "n": 10},
        {"case_id": "a", "method": "m", "period": "induction", "mdpe": 0.0, "mdape": 0.0, "rmse": 1.0, "n": 5},
    ])
    summary = cohort_summary(rows)
    assert summary["period"].tolist() == ["induction", "overall"]
    overall = summary[summary["period"] == "overall"].iloc[0]
    assert overall["rmse_mean"] == pytest.approx(4.0)
    assert overall["rmse_std"] == pytest.approx(math.sqrt(2.0))
    assert overall["mdpe_min"] == 1.0
    assert overall["mdpe_max"] == 3.0

    table = summary_table(summary)
    assert list(table.columns) == ["method", "metric", "induction", "maintenance", "recovery", "overall"]
    rmse_row = table[table["metric"] == "RMSE"].iloc[0]
    assert rmse_row["overall"] == "4.00 ± 1.41 (3.00–5.00)"
    assert rmse_row["maintenance"] == "n/a"


# agreement

def test_ccc_identity():
    true = np.array([40.0, 55.0, 61.0, 47.0])
    assert ccc_value(true, true) == pytest.approx(1.0, abs=1e-12)
    assert ccc(true, true).value == pytest.approx(1.0, abs=1e-12)


def test_ccc_shift_example():
    assert ccc_value([2.0, 3.0, 4.0], [1.0, 2.0, 3.0]) == pytest.approx(4.0 / 7.0)


def test_ccc_near_zero_for_unrelated_series():
    rng = np.random.default_rng(0)
    assert abs(ccc_value(rng.normal(50, 10, 1000), rng.normal(50, 10, 1000))) < 0.2


def test_ccc_interval_brackets_value():
    rng = np.random.default_rng(1)
    true = rng.uniform(30, 70, 500)
    pred = true + rng.normal(0, 5, 500)
    result = ccc(pred, true)
    assert result.lower < result.value < result.upper
    assert result.method == "fisher"
    boot = bootstrap_ccc(pred, true, n_boot=200, seed=3)
    assert boot.value == pytest.approx(result.value)
    assert boot.lower < boot.value < boot.upper
    assert boot == bootstrap_ccc(pred, true, n_boot=200, seed=3)


def test_ccc_symmetric_and_bounded_by_pearson():
    rng = np.random.default_rng(2)
    for _ in range(20):
        true = rng.uniform(20.0, 90.0, 60)
        pred = rng.uniform(0.3, 1.2) * true + rng.normal(rng.uniform(-10.0, 10.0), 8.0, 60)
        value = ccc_value(pred, true)
        assert value == pytest.approx(ccc_value(true, pred), abs=1e-12)
        assert abs(value) <= abs(np.corrcoef(pred, true)[0, 1]) + 1e-12


def test_ccc_degenerate_inputs():
    with pytest.raises(DegenerateSeries):
        ccc([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(DegenerateSeries):
        ccc([50.0, 50.0, 50.0], [1.0, 2.0, 3.0])
    with pytest.raises(MisalignedSeries):
        ccc([1.0, 2.0, 3.0], [1.0, 2.0])


# binned errors and mutations

def test_binned_error_example():
    errors = binned_test_error([42.0, 39.0, 43.0, 60.0], [40.0, 40.0, 40.0, 60.0])
    assert errors.loc[40] == pytest.approx(4.0 / 3.0)
    assert errors.loc[60] == 0.0
    assert list(errors.index) == [40, 60]


def test_binned_error_cancels_signed_errors():
    assert binned_test_error([52.0, 48.0], [50.0, 50.0]).loc[50] == 0.0


def test_binned_error_matches_brute_force():
    rng = np.random.default_rng(2)
    true = rng.uniform(20, 90, 400)
    pred = true + rng.normal(0, 4, 400)
    errors = binned_test_error(pred, true)
    groups = {}
    for p, t in zip(pred, true):
        groups.setdefault(int(math.floor(t + 0.5)), []).append(p - t)
    for b, errs in groups.items():
        assert errors.loc[b] == pytest.approx(abs(sum(errs)) / len(errs), abs=1e-12)
    assert len(errors) == len(groups)


def test_error_reduction():
    reference = pd.Series({10: 4.0, 15: 6.0, 70: 2.0})
    candidate = pd.Series({10: 2.0, 15: 3.0, 70: 2.0})
    assert error_reduction(reference, candidate, 10, 20) == pytest.approx(0.5)
    assert error_reduction(reference, candidate, 60, 90) == pytest.approx(0.0)
    assert math.isnan(error_reduction(reference, candidate, 30, 40))


def test_constant_series_has_no_mutations():
    stats = mutation_stats(np.full(200, 45.0), 5)
    assert stats.n_mutations == 0
    assert all(v == 0.0 for v in stats.fractions.values())


def test_mutation_against_window_minimum():
    bis = np.full(200, 50.0)
    bis[110] = 40.0
    stats = mutation_stats(bis, 7)
    assert stats.mask[100]
    # 40 lies more than 7 below the window maximum as well
    assert stats.mask[110]
    # (t - 30, t + 30) is open: 30 s away does not see the dip
    assert not stats.mask[80]
    assert stats.mask[81]
    assert stats.counts["medium_low"] == stats.n_mutations - 1
    assert stats.counts["many"] == 1


def test_mutation_checks():
    with pytest.raises(WindowExceedsSeries):
        mutation_stats(np.full(20, 50.0), 5)
    with pytest.raises(ValueError):
        mutation_stats(np.full(100, 50.0), 0)


def _ramped_case():
    # induction ramp, 1200 s flat maintenance, recovery ramp
    return np.concatenate((np.linspace(98.0, 40.0, 300), np.full(1200, 40.0), np.linspace(40.0, 95.0, 300)))


def test_mutations_ignore_transition_ramps():
    bis = _ramped_case()
    split = PeriodSplit.from_anchors(0, 1500, 1799)
    stats = maintenance_mutation_stats(bis, split)
    assert [s.magnitude for s in stats] == list(MUTATION_MAGNITUDES)
    assert all(s.n_points == 900 for s in stats)
    assert all(s.n_mutations == 0 for s in stats)
    # the ramps alone produce mutations over the whole record
    assert mutation_stats(bis, 5).n_mutations > 0


def test_maintenance_shorter_than_window():
    split = PeriodSplit.from_anchors(0, 640, 1799)
    with pytest.raises(WindowExceedsSeries):
        maintenance_mutation_stats(_ramped_case(), split)


# report tables

def test_report_frames():
    errors = {"model": pd.Series({40: 1.0, 41: 2.0}), "pkpd": pd.Series({40: 3.0})}
    frame = binned_error_frame(errors)
    assert len(frame) == 101
    assert frame.loc[41, "model"] == 2.0
    assert math.isnan(frame.loc[41, "pkpd"])

    reductions = error_reduction_frame({"model": {"10-20": 0.5, "60-90": 0.1}})
    assert reductions["range"].tolist() == ["10-20", "60-90"]

    result = ccc([2.0, 3.0, 4.5, 5.0], [1.0, 2.0, 3.0, 4.0])
    table = ccc_table({"model": result})
    assert table.loc[0, "ccc"] == result.value
    assert table.loc[0, "ci_method"] == "fisher"


def test_mutation_frame_pools_cases():
    bis = np.full(200, 50.0)
    bis[110] = 40.0
    stats = [mutation_stats(bis, 7), mutation_stats(bis, 7), mutation_stats(bis, 10)]
    table = weights_from_density(smooth_density(bis))
    frame = mutation_frame(stats, table)
    assert frame["region"].tolist() == ["below_31", "many", "medium_low", "medium_high", "few"]
    assert frame["m7_count"].sum() == 2 * stats[0].n_mutations
    assert frame["m7_fraction"].sum() == pytest.approx(1.0)
    assert frame["m10_count"].sum() == 0
    assert "mean_weight" in frame.columns
