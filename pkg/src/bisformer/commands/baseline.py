import argparse
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd

from bisformer.commands.base import BaseCommand, add_common_arguments
from bisformer.commands.common import (
    load_dataset,
    parallel_map,
    prediction_frame,
    split_case_ids,
    write_predictions,
)
from bisformer.core.config import RunConfig
from bisformer.core.models import CommandResult
from bisformer.datapipe.schema import CaseSeries
from bisformer.datapipe.windows import sample_times
from bisformer.pkpd.params import Drug
from bisformer.pkpd.response import simulate_bis


def pkpd_case_predictions(case: CaseSeries) -> pd.DataFrame:
    """Fixed-parameter PK-PD BIS at every prediction second of the case."""
    rates = {drug: case.rates_per_second(drug)[:case.duration] for drug in (Drug.PROPOFOL, Drug.REMIFENTANIL)}
    # simulated[k] is the BIS after k + 1 seconds of infusion
    simulated = simulate_bis(case.patient, rates, dt=1.0)
    times = sample_times(case)
    return prediction_frame(times, case.bis[times], simulated[times - 1])


class BaselinePkpdCommand(BaseCommand):
    help = "Write PK-PD-only BIS predictions from the nominal patient parameters"

    @staticmethod
    def get_command_name() -> str:
        return "baseline-pkpd"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--dataset', type=Path, default=None, help="Dataset directory (default <data>/ingest)")
        parser.add_argument('--split', choices=["train", "val", "test", "all"], default="test")
        add_common_arguments(parser)

    def options(self, args: argparse.Namespace) -> Dict[str, Any]:
        given = {"dataset": str(args.dataset) if args.dataset else None, "split": args.split}
        return {k: v for k, v in given.items() if v is not None}

    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        dataset = load_dataset(config, config.options.get("dataset"))
        case_ids = split_case_ids(dataset, config.options.get("split", "test"))
        out_dir = Path(config.output_dir)
        tracer, session = self.start_trace(config)
        self.write_effective_config(config)

        frames = parallel_map(pkpd_case_predictions, [dataset.cases[cid] for cid in case_ids], config.jobs)
        for cid, frame in zip(case_ids, frames):
            write_predictions(out_dir, cid, frame)
        points = int(sum(len(f) for f in frames))
        rmse = float(np.sqrt(np.mean(np.concatenate(
            [(f["bis_pred"] - f["bis_true"]).to_numpy() ** 2 for f in frames]
        )))) if points else float("nan")
        tracer.log_event(session, "predictions_written", {"cases": len(case_ids), "points": points, "rmse": rmse})
        return CommandResult.ok(
            f"Wrote PK-PD predictions for {len(case_ids)} cases to {out_dir}",
            cases=len(case_ids), points=points, pooled_rmse=rmse,
        )
