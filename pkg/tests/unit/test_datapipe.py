import json

import numpy as np
import pandas as pd
import pytest

from bisformer.core.config import LdsConfig, SplitConfig
from bisformer.core.errors import (
    ConfigError,
    DataError,
    DatasetFormatError,
    EmptyCase,
    MisalignedSeries,
    MissingNorms,
    RejectedCase,
    SeriesTooShort,
    WindowExceedsSeries,
)
from bisformer.datapipe import (
    BIN_SECONDS,
    CaseSeries,
    DatasetOptions,
    DoseMode,
    RawCase,
    SampleBatch,
    assign_splits,
    bin_case,
    build_dataset,
    build_windows,
    compute_norms,
    load_split_manifest,
    lowess_smooth,
    parse_and_clean,
    read_dataset,
    window_at,
    write_dataset,
)
from bisformer.datapipe.dataset import decode_dataset, encode_dataset
from bisformer.datapipe.windows import sample_times
from bisformer.imbalance.lds import smooth_density, weights_from_density
from bisformer.pkpd.params import Drug
from bisformer.pkpd.patient import Patient, Sex
from bisformer.pkpd.response import pkpd_pseudo_bis


def record(n=100, on=10, off=80, bis=50.0):
    """Per-second rows with propofol at 10 ug/s during [on, off)."""
    return [
        (t, 10.0 if on <= t < off else 0.0, 0.05 if on <= t < off else 0.0, bis)
        for t in range(n)
    ]


# ingest

def test_clean_record_parses(tmp_path, case_file_writer):
    raw = parse_and_clean(case_file_writer(tmp_path / "a.csv", record(), case_id="a"))
    assert raw.case_id == "a"
    assert len(raw) == 100
    assert raw.patient.sex is Sex.MALE
    assert list(raw.frame.columns) == ["t", "ppf_dose", "rftn_dose", "bis"]


def test_short_gaps_are_interpolated(tmp_path, case_file_writer):
    rows = record()
    rows[20] = (20, 10.0, 0.05, 40.0)
    rows[26] = (26, 10.0, 0.05, 52.0)
    for t in range(21, 26):
        rows[t] = (t, 10.0, 0.05, None)
    raw = parse_and_clean(case_file_writer(tmp_path / "a.csv", rows))
    assert raw.frame["bis"].iloc[20:27].tolist() == pytest.approx([40, 42, 44, 46, 48, 50, 52])


def test_missing_rows_are_reindexed(tmp_path, case_file_writer):
    rows = [r for r in record() if not 30 <= r[0] < 35]
    raw = parse_and_clean(case_file_writer(tmp_path / "a.csv", rows))
    assert raw.frame["t"].tolist() == list(range(100))
    assert raw.frame["ppf_dose"].iloc[32] == pytest.approx(10.0)


def test_out_of_range_bis_is_replaced(tmp_path, case_file_writer):
    rows = record()
    rows[40] = (40, 10.0, 0.05, 130.0)
    raw = parse_and_clean(case_file_writer(tmp_path / "a.csv", rows))
    assert raw.frame["bis"].iloc[40] == pytest.approx(50.0)


def test_long_gap_rejected(tmp_path, case_file_writer):
    rows = [(t, d1, d2, None if 20 <= t < 51 else b) for t, d1, d2, b in record()]
    with pytest.raises(RejectedCase) as err:
        parse_and_clean(case_file_writer(tmp_path / "a.csv", rows))
    assert err.value.reason == "gap"


def test_thirty_second_gap_accepted(tmp_path, case_file_writer):
    rows = [(t, d1, d2, None if 20 <= t < 50 else b) for t, d1, d2, b in record()]
    assert len(parse_and_clean(case_file_writer(tmp_path / "a.csv", rows))) == 100


def test_record_starting_mid_infusion_rejected(tmp_path, case_file_writer):
    with pytest.raises(RejectedCase) as err:
        parse_and_clean(case_file_writer(tmp_path / "a.csv", record(on=0)))
    assert err.value.reason == "partial"


def test_record_ending_mid_infusion_rejected(tmp_path, case_file_writer):
    with pytest.raises(RejectedCase) as err:
        parse_and_clean(case_file_writer(tmp_path / "a.csv", record(off=100)))
    assert err.value.reason == "partial"


@pytest.mark.parametrize("header", [
    ["# case_id: a", "# age: 53", "# sex: male", "# weight: 77.0"],
    ["# case_id: a", "# age: 53", "# sex: other", "# weight: 77.0", "# height: 177.0"],
    ["# case_id: a", "# age: 53", "# sex: male", "# weight: -1", "# height: 177.0"],
])
def test_bad_header_is_malformed(tmp_path, case_file_writer, header):
    with pytest.raises(RejectedCase) as err:
        parse_and_clean(case_file_writer(tmp_path / "a.csv", record(), header=header))
    assert err.value.reason == "malformed"


def test_wrong_columns_are_malformed(tmp_path, case_file_writer):
    path = case_file_writer(tmp_path / "a.csv", record())
    path.write_text(path.read_text().replace("t,ppf_dose,rftn_dose,bis", "t,propofol,remi,bis"))
    with pytest.raises(RejectedCase) as err:
        parse_and_clean(path)
    assert err.value.reason == "malformed"


def test_unordered_time_is_malformed(tmp_path, case_file_writer):
    rows = record()
    rows[10], rows[11] = rows[11], rows[10]
    with pytest.raises(RejectedCase):
        parse_and_clean(case_file_writer(tmp_path / "a.csv", rows))


def test_cumulative_doses_are_differenced(tmp_path, case_file_writer):
    per_second = record()
    total_ppf = np.cumsum([r[1] for r in per_second])
    total_rftn = np.cumsum([r[2] for r in per_second])
    rows = [(t, float(p), float(r), b) for (t, _, _, b), p, r in zip(per_second, total_ppf, total_rftn)]
    header = ["# case_id: c", "# age: 53", "# sex: male", "# weight: 77.0", "# height: 177.0",
              "# dose_mode: cumulative"]
    raw = parse_and_clean(case_file_writer(tmp_path / "c.csv", rows, header=header))
    assert raw.dose_mode is DoseMode.CUMULATIVE
    assert raw.frame["ppf_dose"].tolist() == pytest.approx([r[1] for r in per_second])
    assert raw.frame["rftn_dose"].tolist() == pytest.approx([r[2] for r in per_second])


# binning

def _raw(n, active, bis=50.0):
    ppf = np.zeros(n)
    ppf[active] = 2.0
    frame = pd.DataFrame({
        "t": np.arange(100, 100 + n), "ppf_dose": ppf, "rftn_dose": np.full(n, 0.1), "bis": np.full(n, bis),
    })
    return RawCase("r", Patient(age=40, sex=Sex.FEMALE, weight=60, height=160), frame)


def test_binning_sums_and_anchors():
    case = bin_case(_raw(25, slice(3, 15)))
    assert case.n_bins == 3
    assert case.ppf_dose.tolist() == [14.0, 10.0, 0.0]
    assert case.rftn_dose.tolist() == pytest.approx([1.0, 1.0, 0.5])
    assert case.t_induction_start == 3
    assert case.t_propofol_stop == 14
    assert case.t_end == 24
    assert case.t_origin == 100.0
    assert case.duration == 25


def test_binning_rates():
    case = bin_case(_raw(20, slice(0, 20)))
    assert case.bin_rates(Drug.PROPOFOL).tolist() == [2.0, 2.0]
    assert len(case.rates_per_second(Drug.PROPOFOL)) == 2 * BIN_SECONDS


def test_binning_without_propofol():
    with pytest.raises(EmptyCase):
        bin_case(_raw(30, slice(0, 0)))


# lowess

def test_lowess_keeps_lines():
    line = 3.0 + 0.25 * np.arange(200)
    assert np.abs(lowess_smooth(line, 0.1) - line).max() < 1e-9


def test_lowess_keeps_constants():
    assert np.allclose(lowess_smooth(np.full(50, 42.0), 0.2), 42.0)


def test_lowess_reduces_noise():
    rng = np.random.default_rng(0)
    signal = 50.0 + 10.0 * np.sin(np.linspace(0, 3, 2000))
    noisy = signal + rng.normal(0, 3.0, size=2000)
    smoothed = lowess_smooth(noisy, 0.03)
    assert len(smoothed) == 2000
    assert (smoothed - signal).std() < 0.5 * (noisy - signal).std()


def test_lowess_input_checks():
    with pytest.raises(SeriesTooShort):
        lowess_smooth([1.0, 2.0])
    with pytest.raises(ValueError):
        lowess_smooth(np.ones(10), frac=0.0)


# windows

@pytest.fixture
def long_case(case_factory):
    return case_factory("w", seconds=1800, infusion_bins=(0, 120))


def test_window_pads_before_the_record(long_case):
    norms = compute_norms([long_case])
    pseudo = pkpd_pseudo_bis(long_case.patient, long_case)
    sample = window_at(long_case, pseudo, norms, 600)
    assert sample.x_drug.shape == (180, 2)
    # 600 s completes 60 bins; the other 120 steps are padding
    assert np.allclose(sample.x_pseudo[:120], norms.bis(98.0))
    assert np.allclose(sample.x_pseudo[120:], norms.bis(pseudo[:60]))
    assert np.allclose(sample.x_drug[:120], norms.drug(np.zeros(1), np.zeros(1))[0])
    assert np.all(sample.y_history[:120] == long_case.bis[0])
    assert sample.y_history[-1] == long_case.bis[599]
    assert sample.y_target == long_case.bis[600]


def test_window_uses_completed_bins_only(long_case):
    norms = compute_norms([long_case])
    pseudo = pkpd_pseudo_bis(long_case.patient, long_case)
    a = window_at(long_case, pseudo, norms, 600)
    b = window_at(long_case, pseudo, norms, 609)
    assert np.array_equal(a.x_pseudo, b.x_pseudo)
    assert a.y_target != b.y_target


def test_early_window_is_all_padding(long_case):
    norms = compute_norms([long_case])
    pseudo = pkpd_pseudo_bis(long_case.patient, long_case)
    sample = window_at(long_case, pseudo, norms, 5, window_bins=8)
    assert sample.x_pseudo.shape == (8,)
    assert np.allclose(sample.x_pseudo, norms.bis(98.0))


def test_build_windows_stride_and_weights(long_case):
    norms = compute_norms([long_case])
    pseudo = pkpd_pseudo_bis(long_case.patient, long_case)
    table = weights_from_density(smooth_density(long_case.bis))
    batch = build_windows(long_case, pseudo, norms, table=table, stride=10, window_bins=8)
    assert batch.times.tolist() == sample_times(long_case, 10).tolist()
    assert batch.times[0] == 1
    assert len(batch) == 180
    assert batch.steps == 8
    assert np.array_equal(batch.weight, table.lookup(batch.y_target))
    assert set(batch.case_ids) == {"w"}


def test_build_windows_errors(long_case):
    norms = compute_norms([long_case])
    pseudo = pkpd_pseudo_bis(long_case.patient, long_case)
    with pytest.raises(MissingNorms):
        build_windows(long_case, pseudo, None)
    with pytest.raises(MisalignedSeries):
        build_windows(long_case, pseudo[:-1], norms)
    with pytest.raises(WindowExceedsSeries):
        build_windows(long_case, pseudo, norms, times=np.array([1800]))


def test_norms_from_training_cases(case_factory):
    a = case_factory("a", bis=np.full(600, 40.0))
    b = case_factory("b", bis=np.full(600, 60.0), ppf_rate=50.0)
    norms = compute_norms([a, b])
    assert norms.bis_mean == pytest.approx(50.0)
    assert norms.bis_scale == pytest.approx(10.0)
    # identical covariates fall back to unit scale
    assert norms.static_scale == [1.0, 1.0, 1.0, 1.0]
    with pytest.raises(MissingNorms):
        compute_norms([])


def test_sample_batch_checks_lengths():
    with pytest.raises(MisalignedSeries):
        SampleBatch(np.zeros((2, 4, 2)), np.zeros((2, 4)), np.zeros((2, 4)), np.zeros((2, 4)),
                    np.zeros(3), np.ones(3))


def test_case_series_checks():
    patient = Patient(age=40, sex=Sex.MALE, weight=70, height=170)
    with pytest.raises(MisalignedSeries):
        CaseSeries("x", patient, np.zeros(3), np.zeros(2), np.zeros(30), 0, 5, 29)
    with pytest.raises(ValueError):
        CaseSeries("x", patient, np.zeros(3), np.zeros(3), np.zeros(30), 10, 5, 29)


# splits and datasets

def test_assign_splits_partitions():
    ids = [f"case_{i:02d}" for i in range(10)]
    splits = assign_splits(ids, SplitConfig(), seed=3)
    assert [len(splits[k]) for k in ("train", "val", "test")] == [6, 2, 2]
    assert sorted(sum(splits.values(), [])) == ids
    assert splits == assign_splits(list(reversed(ids)), SplitConfig(), seed=3)
    assert splits != assign_splits(ids, SplitConfig(), seed=4)


def test_assign_splits_keeps_a_training_case():
    splits = assign_splits(["only"], SplitConfig(train=0.0, val=0.5, test=0.5), seed=0)
    assert splits["train"] == ["only"]
    with pytest.raises(DataError):
        assign_splits([], SplitConfig(), seed=0)


def _manifest(tmp_path, data):
    path = tmp_path / "splits.json"
    path.write_text(json.dumps(data))
    return path


def test_split_manifest(tmp_path):
    path = _manifest(tmp_path, {"train": ["a", "b"], "test": ["c"]})
    assert load_split_manifest(path, ["a", "b", "c"]) == {"train": ["a", "b"], "val": [], "test": ["c"]}


@pytest.mark.parametrize("data", [
    {"train": ["a"], "test": ["a"]},
    {"train": ["a"], "test": ["zzz"]},
    {"train": [], "test": ["a"]},
    {"train": ["a"], "holdout": ["b"]},
])
def test_bad_split_manifest(tmp_path, data):
    with pytest.raises(ConfigError):
        load_split_manifest(_manifest(tmp_path, data), ["a", "b", "c"])


def test_missing_split_manifest(tmp_path):
    with pytest.raises(ConfigError):
        load_split_manifest(tmp_path / "absent.json", ["a"])


@pytest.fixture
def small_dataset(case_factory):
    rng = np.random.default_rng(0)
    cases = [
        case_factory(cid, seconds=600, bis=np.clip(np.linspace(95, 40, 600) + rng.normal(0, 3, 600), 0, 100))
        for cid in ("a", "b", "c")
    ]
    options = DatasetOptions(window_bins=8, lds=LdsConfig(sigma=2.0, radius=4, w_cap=50.0))
    return build_dataset(cases, {"train": ["a", "b"], "val": ["c"], "test": []}, options)


def test_build_dataset_training_samples(small_dataset):
    train = small_dataset.samples["train"]
    assert len(train) == 2 * 60
    assert train.times[:3].tolist() == [1, 11, 21]
    assert train.steps == 8
    raw = small_dataset.cases["a"].bis[train.times[:60]]
    # labels are smoothed, inputs history too
    assert not np.allclose(train.y_target[:60], raw)
    assert np.abs(train.y_target[:60] - raw).mean() < 5.0
    assert train.weight.min() >= 1.0 - 1e-12
    assert small_dataset.weight_table is not None


def test_dataset_eval_windows_are_unsmoothed(small_dataset):
    val = small_dataset.windows("val")
    case = small_dataset.cases["c"]
    assert len(val) == 599
    assert np.array_equal(val.y_target, case.bis[1:])
    with pytest.raises(DataError):
        small_dataset.windows("holdout")


def test_dataset_files_round_trip(tmp_path, small_dataset):
    write_dataset(tmp_path, small_dataset)
    for name in ("dataset.bin", "norms.json", "splits.json", "weight_table.csv"):
        assert (tmp_path / name).exists()
    loaded = read_dataset(tmp_path)
    assert list(loaded.cases) == ["a", "b", "c"]
    assert loaded.splits == small_dataset.splits
    assert loaded.norms == small_dataset.norms
    assert loaded.options.to_dict() == small_dataset.options.to_dict()
    case = loaded.cases["b"]
    assert np.array_equal(case.bis, small_dataset.cases["b"].bis)
    assert case.patient == small_dataset.cases["b"].patient
    assert np.array_equal(loaded.pseudo["c"], small_dataset.pseudo["c"])
    for name in ("x_drug", "x_pseudo", "y_target", "weight", "times"):
        assert np.array_equal(getattr(loaded.samples["train"], name), getattr(small_dataset.samples["train"], name))
    assert loaded.samples["train"].case_ids.tolist() == small_dataset.samples["train"].case_ids.tolist()
    assert np.array_equal(loaded.weight_table.w, small_dataset.weight_table.w)


def test_dataset_bytes_are_deterministic(small_dataset):
    assert encode_dataset(small_dataset) == encode_dataset(decode_dataset(encode_dataset(small_dataset)))


def test_dataset_rejects_model_file(small_dataset):
    payload = encode_dataset(small_dataset)
    with pytest.raises(DatasetFormatError):
        decode_dataset(b"BISF" + payload[4:])
    with pytest.raises(DatasetFormatError):
        decode_dataset(payload[:100])
