import argparse
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from bisformer.commands.base import BaseCommand, add_common_arguments
from bisformer.commands.common import common_cases, load_dataset, parse_method_specs, read_predictions
from bisformer.core.config import RunConfig
from bisformer.core.errors import DataError
from bisformer.core.models import CommandResult
from bisformer.metrics.binned import binned_test_error
from bisformer.metrics.periods import PERIODS, split_periods
from bisformer.metrics.reports import binned_error_frame
from bisformer.utils.files import write_frame_atomic


def _period_labels(times: np.ndarray, case) -> np.ndarray:
    labels = np.full(len(times), "", dtype=object)
    split = split_periods(case)
    for name in PERIODS:
        labels[split.mask(times, name)] = name
    return labels


class PlotDataCommand(BaseCommand):
    help = "Join predictions, truths and infusions into figure-ready CSVs"

    @staticmethod
    def get_command_name() -> str:
        return "plot-data"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--dataset', type=Path, default=None, help="Dataset directory (default <data>/ingest)")
        parser.add_argument('--method', action='append', default=None, metavar="NAME=DIR",
                            help="Prediction directory of one method (repeatable)")
        add_common_arguments(parser)

    def options(self, args: argparse.Namespace) -> Dict[str, Any]:
        given = {
            "dataset": str(args.dataset) if args.dataset else None,
            "methods": list(args.method) if args.method else None,
        }
        return {k: v for k, v in given.items() if v is not None}

    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        methods = parse_method_specs(config.options.get("methods"), Path(config.data_dir))
        dataset = load_dataset(config, config.options.get("dataset"))
        predictions = OrderedDict((name, read_predictions(path)) for name, path in methods.items())
        case_ids = [cid for cid in common_cases(predictions) if cid in dataset.cases]
        if not case_ids:
            raise DataError("no predicted cases found in the dataset")

        out_dir = Path(config.output_dir)
        tracer, session = self.start_trace(config)
        self.write_effective_config(config)

        traces: List[pd.DataFrame] = []
        infusions: List[pd.DataFrame] = []
        for cid in case_ids:
            case = dataset.cases[cid]
            joined = None
            for name, per_case in predictions.items():
                frame = per_case[cid][["t", "bis_true", "bis_pred"]].rename(columns={"bis_pred": f"pred_{name}"})
                joined = frame if joined is None else joined.merge(frame.drop(columns="bis_true"), on="t", how="inner")
            joined.insert(0, "case_id", cid)
            joined["period"] = _period_labels(joined["t"].to_numpy(), case)
            traces.append(joined)

            bins = case.bins_frame()
            bins.insert(0, "case_id", cid)
            bins["pseudo_bis"] = dataset.pseudo[cid]
            infusions.append(bins)
        trace_frame = pd.concat(traces, ignore_index=True)

        binned = OrderedDict(
            (name, binned_test_error(trace_frame[f"pred_{name}"], trace_frame["bis_true"])) for name in methods
        )
        write_frame_atomic(out_dir / "traces.csv", trace_frame)
        write_frame_atomic(out_dir / "infusions.csv", pd.concat(infusions, ignore_index=True))
        write_frame_atomic(out_dir / "binned_error.csv", binned_error_frame(binned))
        written = ["traces.csv", "infusions.csv", "binned_error.csv"]
        if dataset.weight_table is not None:
            write_frame_atomic(out_dir / "label_density.csv", dataset.weight_table.to_frame())
            written.append("label_density.csv")
        tracer.log_event(session, "plot_data_written", {"cases": len(case_ids), "files": written})
        return CommandResult.ok(
            f"Wrote {', '.join(written)} for {len(case_ids)} cases to {out_dir}",
            cases=len(case_ids), files=written,
        )
