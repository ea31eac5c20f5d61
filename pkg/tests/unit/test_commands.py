import argparse
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from bisformer.cli import build_parser, main
from bisformer.commands.base import BaseCommand
from bisformer.commands.common import (
    common_cases,
    parallel_map,
    parse_method_specs,
    prediction_frame,
    read_predictions,
    write_predictions,
)
from bisformer.commands.evaluate import cohort_mutation_stats
from bisformer.commands.manager import COMMAND_REGISTRY, CommandManager
from bisformer.core.config import Settings
from bisformer.core.errors import ConfigError, DataIoError, MisalignedSeries, NumericalError
from bisformer.core.models import CommandResult
from bisformer.core.tracer import RunTracer
from bisformer.metrics.periods import split_periods


@pytest.fixture
def manager(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return CommandManager(Settings(data_dir=tmp_path / "data"))


class FailingCommand(BaseCommand):
    help = "always fails"

    def __init__(self, settings, error):
        super().__init__(settings)
        self.error = error

    @staticmethod
    def get_command_name() -> str:
        return "fail"

    def add_arguments(self, parser):
        pass

    def execute(self, config, args):
        raise self.error


def test_registry_names(manager):
    assert manager.command_names() == list(COMMAND_REGISTRY)
    assert set(COMMAND_REGISTRY) == {
        "synth", "ingest", "train", "predict", "evaluate", "baseline-pkpd", "plot-data",
    }
    for name in COMMAND_REGISTRY:
        assert manager.get_command(name).get_command_name() == name


def test_parser_accepts_every_command(manager):
    parser = build_parser(manager)
    args = parser.parse_args(["train", "--epochs", "2", "--no-grn", "--seed", "5"])
    assert (args.command, args.epochs, args.no_grn, args.seed) == ("train", 2, True, 5)
    with pytest.raises(SystemExit):
        parser.parse_args([])


def test_unknown_command_is_config_error(manager):
    result = manager.run("nope", argparse.Namespace())
    assert result.exit_code == 2
    assert not result.success


@pytest.mark.parametrize("error, code", [
    (NumericalError("loss diverged"), 6),
    (KeyError("surprise"), 1),
])
def test_manager_converts_failures(manager, error, code):
    manager.register_command(FailingCommand(manager.settings, error))
    result = manager.run("fail", argparse.Namespace(config=None))
    assert result.exit_code == code


def test_train_flags_resolve_into_sections(manager, tmp_path):
    command = manager.get_command("train")
    args = build_parser(manager).parse_args(
        ["train", "--variant", "lstm", "--epochs", "3", "--no-reweight", "--out", str(tmp_path / "o")]
    )
    config = command.resolve(args)
    assert config.model.is_lstm_baseline
    assert not config.model.use_attention
    assert config.train.epochs == 3
    assert config.train.reweight is False
    assert config.output_dir == tmp_path / "o"


def test_parallel_map_keeps_order():
    items = [9.0, 1.0, 4.0, 16.0]
    assert parallel_map(math.sqrt, items, 1) == [3.0, 1.0, 2.0, 4.0]
    assert parallel_map(math.sqrt, items, 2) == [3.0, 1.0, 2.0, 4.0]


def test_prediction_files(tmp_path):
    frame = prediction_frame([1, 2, 3], [50.0, 51.0, 52.0], [49.0, 50.5, 53.0])
    assert list(frame.columns) == ["t", "bis_true", "bis_pred"]
    write_predictions(tmp_path, "case_b", frame)
    write_predictions(tmp_path, "case_a", frame)
    loaded = read_predictions(tmp_path)
    assert list(loaded) == ["case_a", "case_b"]
    pd.testing.assert_frame_equal(loaded["case_a"], frame)
    with pytest.raises(MisalignedSeries):
        prediction_frame([1, 2], [50.0], [49.0, 48.0])


def test_read_predictions_errors(tmp_path):
    with pytest.raises(DataIoError):
        read_predictions(tmp_path)
    (tmp_path / "cases").mkdir()
    (tmp_path / "cases" / "c1.csv").write_text("t,bis\n1,50\n")
    with pytest.raises(DataIoError, match="lacks columns"):
        read_predictions(tmp_path)


def test_method_specs(tmp_path):
    methods = parse_method_specs(["a=x", "b=y"], tmp_path)
    assert methods == {"a": Path("x"), "b": Path("y")}
    with pytest.raises(ConfigError):
        parse_method_specs(["a"], tmp_path)
    with pytest.raises(ConfigError):
        parse_method_specs(["a=x", "a=y"], tmp_path)
    with pytest.raises(ConfigError):
        parse_method_specs(None, tmp_path)
    (tmp_path / "baseline-pkpd" / "cases").mkdir(parents=True)
    assert parse_method_specs(None, tmp_path) == {"pkpd": tmp_path / "baseline-pkpd"}


def test_common_cases():
    predictions = {"a": {"c1": None, "c2": None}, "b": {"c2": None, "c3": None}}
    assert common_cases(predictions) == ["c2"]


def test_tracer_writes_jsonl(tmp_path):
    tracer = RunTracer(tmp_path, enabled=True)
    session = tracer.start_session("train", {"path": tmp_path, "value": np.float64(1.5)})
    tracer.log_event(session, "epoch", {"objective": np.float64(2.0)})
    with tracer.stage(session, "fit") as stage:
        stage["samples"] = np.int64(3)
    events = [json.loads(line) for line in tracer.path.read_text().splitlines()]
    assert [e["event"] for e in events] == ["session_start", "epoch", "stage"]
    assert events[0]["details"]["config"] == {"path": str(tmp_path), "value": 1.5}
    assert events[1]["details"] == {"objective": 2.0}
    assert events[2]["details"]["stage"] == "fit"
    assert events[2]["details"]["samples"] == 3
    assert all(e["elapsed_s"] >= 0 for e in events)
    assert not RunTracer(tmp_path, enabled=False).enabled
    assert RunTracer(None, enabled=True).start_session("x") is None


def test_main_rejects_bad_environment(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("BISFORMER_JOBS", "0")
    assert main(["synth", "--data-dir", str(tmp_path)]) == 2


def test_main_reports_missing_inputs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("BISFORMER_JOBS", raising=False)
    assert main(["train", "--data-dir", str(tmp_path)]) == 3
    assert main(["ingest", "--data-dir", str(tmp_path), "--config", str(tmp_path / "nope.json")]) == 2
    # no output directory is created just to hold the failure report
    assert not (tmp_path / "train").exists()


def test_result_round_trips_through_json():
    result = CommandResult.ok("fine", n=1)
    assert CommandResult.model_validate_json(result.model_dump_json()) == result


def test_result_validates_assignment():
    result = CommandResult.ok("fine")
    assert CommandResult.model_config["validate_assignment"] is True
    with pytest.raises(ValidationError):
        result.exit_code = "not a code"
    result.exit_code = 5
    assert result.exit_code == 5


def test_evaluate_scans_maintenance_only(case_factory, caplog):
    ramps = np.concatenate((np.linspace(98.0, 40.0, 300), np.full(1200, 40.0), np.linspace(40.0, 95.0, 300)))
    flat = case_factory("flat", seconds=1800, infusion_bins=(0, 150), bis=ramps)
    short = case_factory("short", seconds=1800, infusion_bins=(0, 64), bis=ramps)
    cases = {"flat": flat, "short": short}
    splits = {cid: split_periods(case) for cid, case in cases.items()}
    assert splits["flat"].maintenance == (600, 1499)
    assert splits["short"].maintenance == (600, 639)
    with caplog.at_level("WARNING", logger="bisformer.commands.evaluate"):
        stats = cohort_mutation_stats(cases, splits)
    assert len(stats) == 3
    assert all(s.n_mutations == 0 for s in stats)
    assert "Skipping mutation statistics for short" in caplog.text
