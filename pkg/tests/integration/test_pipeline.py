import json
import shutil

import pandas as pd
import pytest

from bisformer.cli import main

SYNTH = {"synth": {"duration_range": [1800, 1800], "noise_sd": 1.0}}
MODEL = {
    "model": {
        "lstm_hidden": 4,
        "grn_hidden": 4,
        "num_heads": 2,
        "bottleneck_widths": [4, 4, 1],
        "sequence_length": 8,
    },
    "train": {"epochs": 1, "batch_size": 128, "micro_batch": 64, "lr": 0.01},
}


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Runs every command once over four short synthetic cases."""
    root = tmp_path_factory.mktemp("run")
    data = root / "data"
    synth_cfg = _write(root / "synth.json", SYNTH)
    model_cfg = _write(root / "model.json", MODEL)
    common = ["--data-dir", str(data), "--seed", "11", "--jobs", "1"]
    codes = {
        "synth": main(["synth", "--cases", "4", "--config", synth_cfg, *common]),
        "ingest": main(["ingest", "--window-bins", "8", *common]),
        "train": main(["train", "--config", model_cfg, *common]),
        "predict": main(["predict", *common]),
        "baseline-pkpd": main(["baseline-pkpd", *common]),
        "evaluate": main(["evaluate", *common]),
        "plot-data": main(["plot-data", *common]),
    }
    return data, codes, model_cfg, common


def test_every_command_succeeds(pipeline):
    data, codes, _, _ = pipeline
    assert codes == {name: 0 for name in codes}
    for name in codes:
        echoed = json.loads((data / name / "effective_config.json").read_text())
        assert echoed["command"] == name
        assert echoed["seed"] == 11


def test_synth_and_ingest_outputs(pipeline):
    data, _, _, _ = pipeline
    assert len(list((data / "synth").glob("*.csv"))) == 4
    manifest = json.loads((data / "synth" / "manifest.json").read_text())
    assert [c["case_id"] for c in manifest["cases"]] == [f"case_{i:04d}" for i in range(4)]
    splits = json.loads((data / "ingest" / "splits.json").read_text())
    assert sum(len(v) for v in splits.values()) == 4
    assert len(splits["train"]) == 2 and len(splits["test"]) == 1
    assert json.loads((data / "ingest" / "rejected.json").read_text()) == []
    assert (data / "ingest" / "weight_table.csv").is_file()


def test_training_outputs(pipeline):
    data, _, _, _ = pipeline
    log = pd.read_csv(data / "train" / "loss_log.csv")
    assert log["epoch"].tolist() == [0]
    assert log["objective"].notna().all()
    summary = json.loads((data / "train" / "training_summary.json").read_text())
    assert summary["samples"] > 0
    echoed = json.loads((data / "train" / "effective_config.json").read_text())
    assert echoed["model"]["sequence_length"] == 8
    assert echoed["train"]["seed"] == 11


def test_predictions_cover_test_split(pipeline):
    data, _, _, _ = pipeline
    test_ids = json.loads((data / "ingest" / "splits.json").read_text())["test"]
    for method in ("predict", "baseline-pkpd"):
        files = sorted((data / method / "cases").glob("*.csv"))
        assert [f.stem for f in files] == test_ids
        frame = pd.read_csv(files[0])
        assert list(frame.columns) == ["t", "bis_true", "bis_pred"]
        assert frame["t"].is_monotonic_increasing
        assert frame["bis_pred"].notna().all()
    model = pd.read_csv(data / "predict" / "cases" / f"{test_ids[0]}.csv")
    pkpd = pd.read_csv(data / "baseline-pkpd" / "cases" / f"{test_ids[0]}.csv")
    assert model["t"].tolist() == pkpd["t"].tolist()


def test_evaluation_reports(pipeline):
    data, _, _, _ = pipeline
    out = data / "evaluate"
    for name in ("case_metrics.csv", "summary.csv", "summary_table.csv", "ccc.csv",
                 "binned_error.csv", "error_reduction.csv", "mutations.csv"):
        assert (out / name).is_file(), name
    metrics = pd.read_csv(out / "case_metrics.csv")
    assert set(metrics["method"]) == {"model", "pkpd"}
    assert set(metrics["period"]) >= {"induction", "recovery", "overall"}
    assert len(pd.read_csv(out / "binned_error.csv")) == 101
    reductions = pd.read_csv(out / "error_reduction.csv")
    assert set(reductions["method"]) == {"pkpd"}
    assert set(reductions["range"]) == {"10-20", "60-90"}


def test_plot_data_outputs(pipeline):
    data, _, _, _ = pipeline
    traces = pd.read_csv(data / "plot-data" / "traces.csv")
    assert {"case_id", "t", "bis_true", "pred_model", "pred_pkpd", "period"} <= set(traces.columns)
    infusions = pd.read_csv(data / "plot-data" / "infusions.csv")
    assert "pseudo_bis" in infusions.columns
    assert (data / "plot-data" / "label_density.csv").is_file()


def test_trace_file_records_epochs(pipeline):
    data, _, _, _ = pipeline
    events = [json.loads(line)["event"] for line in (data / "train" / "trace.jsonl").read_text().splitlines()]
    assert events[0] == "session_start"
    assert "epoch" in events
    assert events[-1] == "model_written"


def test_training_is_reproducible(pipeline, tmp_path):
    data, _, model_cfg, common = pipeline
    assert main(["train", "--config", model_cfg, "--out", str(tmp_path / "again"), *common]) == 0
    assert (tmp_path / "again" / "model.bisf").read_bytes() == (data / "train" / "model.bisf").read_bytes()


def test_warm_start_fine_tunes(pipeline, tmp_path):
    data, _, model_cfg, common = pipeline
    code = main(["train", "--config", model_cfg, "--warm-start", str(data / "train" / "model.bisf"),
                 "--out", str(tmp_path / "tuned"), *common])
    assert code == 0
    summary = json.loads((tmp_path / "tuned" / "training_summary.json").read_text())
    assert summary["warm_start"].endswith("model.bisf")


def test_streaming_prediction_matches_batch(pipeline, tmp_path):
    data, _, _, common = pipeline
    assert main(["predict", "--stream", "--out", str(tmp_path / "stream"), *common]) == 0
    test_id = json.loads((data / "ingest" / "splits.json").read_text())["test"][0]
    streamed = pd.read_csv(tmp_path / "stream" / "cases" / f"{test_id}.csv")
    batch = pd.read_csv(data / "predict" / "cases" / f"{test_id}.csv")
    assert streamed["t"].tolist() == batch["t"].tolist()
    assert streamed["bis_pred"].to_numpy() == pytest.approx(batch["bis_pred"].to_numpy(), abs=1e-8)
    latency = pd.read_csv(tmp_path / "stream" / "latency.csv")
    assert len(latency) == len(streamed)


def test_partial_ingest_reports_rejections(pipeline, tmp_path):
    data, _, _, common = pipeline
    cases = tmp_path / "cases"
    shutil.copytree(data / "synth", cases)
    (cases / "broken.csv").write_text("# case_id: broken\nt,ppf_dose\n0,1\n", encoding="utf-8")
    out = tmp_path / "ingested"
    code = main(["ingest", "--cases-dir", str(cases), "--window-bins", "8", "--out", str(out), *common])
    assert code == 5
    rejected = json.loads((out / "rejected.json").read_text())
    assert [r["file"] for r in rejected] == ["broken.csv"]
    assert rejected[0]["reason"] == "malformed"
    report = json.loads((out / "error_report.json").read_text())
    assert report["exit_code"] == 5
    assert (out / "dataset.bin").is_file()


def test_missing_dataset_is_io_error(tmp_path):
    assert main(["predict", "--data-dir", str(tmp_path)]) == 3


def test_invalid_split_writes_nothing(pipeline, tmp_path):
    _, _, _, common = pipeline
    out = tmp_path / "bad-split"
    assert main(["ingest", "--split", "0.5", "0.5", "0.5", "--out", str(out), *common]) == 2
    assert not out.exists()


def test_evaluate_reports_are_reproducible(pipeline, tmp_path):
    data, _, _, common = pipeline
    assert main(["evaluate", "--out", str(tmp_path / "again"), *common]) == 0
    for name in ("case_metrics.csv", "summary_table.csv", "ccc.csv", "binned_error.csv", "mutations.csv"):
        assert (tmp_path / "again" / name).read_bytes() == (data / "evaluate" / name).read_bytes(), name


def test_stream_latency_is_recorded(pipeline, tmp_path):
    _, _, _, common = pipeline
    out = tmp_path / "stream"
    assert main(["predict", "--stream", "--split", "val", "--out", str(out), *common]) == 0
    summary = json.loads((out / "predict_summary.json").read_text())
    assert summary["stream"] is True
    assert summary["median_latency_s"] < 0.1
