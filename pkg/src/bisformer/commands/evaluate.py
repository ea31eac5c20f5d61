import argparse
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from bisformer.commands.base import BaseCommand, add_common_arguments
from bisformer.commands.common import common_cases, load_dataset, parse_method_specs, read_predictions
from bisformer.core.config import RunConfig
from bisformer.core.errors import ConfigError, DataError, DegenerateSeries, WindowExceedsSeries
from bisformer.core.models import CommandResult
from bisformer.datapipe.schema import CaseSeries
from bisformer.metrics.agreement import CccResult, bootstrap_ccc, ccc
from bisformer.metrics.binned import MutationStats, binned_test_error, error_reduction, maintenance_mutation_stats
from bisformer.metrics.clinical import case_metrics, cohort_summary
from bisformer.metrics.periods import PeriodSplit, split_periods
from bisformer.metrics.reports import (
    binned_error_frame,
    ccc_table,
    error_reduction_frame,
    mutation_frame,
    summary_table,
)
from bisformer.utils.files import write_frame_atomic

logger = logging.getLogger(__name__)

REDUCTION_RANGES = {"10-20": (10, 20), "60-90": (60, 90)}
REPORT_FILES = (
    "case_metrics.csv", "summary.csv", "summary_table.csv", "ccc.csv",
    "binned_error.csv", "error_reduction.csv", "mutations.csv",
)


def _nan_ccc(n: int, method: str) -> CccResult:
    nan = float("nan")
    return CccResult(nan, nan, nan, n, method)


def cohort_mutation_stats(cases: Dict[str, CaseSeries], splits: Dict[str, PeriodSplit]) -> List[MutationStats]:
    """Maintenance-period mutation statistics of every case, skipping maintenance spans too short to scan."""
    stats: List[MutationStats] = []
    for cid, case in cases.items():
        try:
            stats.extend(maintenance_mutation_stats(case.bis, splits[cid]))
        except WindowExceedsSeries as e:
            logger.warning(f"Skipping mutation statistics for {cid}: maintenance {e.message}")
    return stats


class EvaluateCommand(BaseCommand):
    help = "Score prediction directories: period metrics, CCC, binned errors and mutation statistics"

    @staticmethod
    def get_command_name() -> str:
        return "evaluate"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--dataset', type=Path, default=None, help="Dataset directory (default <data>/ingest)")
        parser.add_argument('--method', action='append', default=None, metavar="NAME=DIR",
                            help="Prediction directory of one method (repeatable)")
        parser.add_argument('--reference', default=None, help="Method the error reductions are measured against")
        parser.add_argument('--bootstrap', type=int, default=0, metavar="N",
                            help="Add a percentile bootstrap CCC interval with N resamples")
        add_common_arguments(parser)

    def options(self, args: argparse.Namespace) -> Dict[str, Any]:
        given = {
            "dataset": str(args.dataset) if args.dataset else None,
            "methods": list(args.method) if args.method else None,
            "reference": args.reference,
            "bootstrap": args.bootstrap,
        }
        return {k: v for k, v in given.items() if v is not None}

    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        methods = parse_method_specs(config.options.get("methods"), Path(config.data_dir))
        reference = config.options.get("reference") or next(iter(methods))
        if reference not in methods:
            raise ConfigError(f"reference method '{reference}' is not among {list(methods)}")
        n_boot = int(config.options.get("bootstrap", 0))
        if n_boot < 0:
            raise ConfigError("bootstrap resamples must be non-negative")
        dataset = load_dataset(config, config.options.get("dataset"))
        predictions = OrderedDict((name, read_predictions(path)) for name, path in methods.items())
        case_ids = common_cases(predictions)
        if not case_ids:
            raise DataError("the methods share no cases")
        unknown = [cid for cid in case_ids if cid not in dataset.cases]
        if unknown:
            raise DataError(f"predictions for cases missing from the dataset: {unknown}", cases=unknown)

        out_dir = Path(config.output_dir)
        tracer, session = self.start_trace(config)
        self.write_effective_config(config)

        rows: List[dict] = []
        pooled: Dict[str, List[pd.DataFrame]] = {name: [] for name in methods}
        splits = {}
        for cid in case_ids:
            split = splits[cid] = split_periods(dataset.cases[cid])
            for name in methods:
                frame = predictions[name][cid]
                zero = frame["bis_true"] == 0
                if zero.any():
                    logger.warning(f"{name}/{cid}: excluding {int(zero.sum())} points with true BIS 0")
                    frame = frame[~zero]
                metrics = case_metrics(frame["bis_pred"], frame["bis_true"], split, frame["t"].to_numpy())
                rows.extend(metrics.to_rows(cid, name))
                pooled[name].append(frame)
        case_frame = pd.DataFrame(rows)
        summary = cohort_summary(case_frame)

        agreement: "OrderedDict[str, CccResult]" = OrderedDict()
        binned: "OrderedDict[str, pd.Series]" = OrderedDict()
        for name, frames in pooled.items():
            joined = pd.concat(frames, ignore_index=True)
            pred, true = joined["bis_pred"].to_numpy(), joined["bis_true"].to_numpy()
            try:
                agreement[name] = ccc(pred, true)
            except DegenerateSeries as e:
                logger.warning(f"CCC undefined for {name}: {e.message}")
                agreement[name] = _nan_ccc(len(pred), "fisher")
            if n_boot:
                try:
                    agreement[f"{name} (bootstrap)"] = bootstrap_ccc(pred, true, n_boot, seed=config.seed)
                except DegenerateSeries:
                    agreement[f"{name} (bootstrap)"] = _nan_ccc(len(pred), "bootstrap")
            binned[name] = binned_test_error(pred, true)

        reductions = OrderedDict(
            (name, {label: error_reduction(binned[reference], binned[name], lo, hi)
                    for label, (lo, hi) in REDUCTION_RANGES.items()})
            for name in methods if name != reference
        )

        stats = cohort_mutation_stats({cid: dataset.cases[cid] for cid in case_ids}, splits)

        reports = {
            "case_metrics.csv": case_frame,
            "summary.csv": summary,
            "summary_table.csv": summary_table(summary),
            "ccc.csv": ccc_table(agreement),
            "binned_error.csv": binned_error_frame(binned),
            "error_reduction.csv": error_reduction_frame(reductions),
            "mutations.csv": mutation_frame(stats, dataset.weight_table),
        }
        for file_name in REPORT_FILES:
            write_frame_atomic(out_dir / file_name, reports[file_name])

        overall = summary[summary["period"] == "overall"].set_index("method")
        headline = {name: {"rmse_mean": float(overall.loc[name, "rmse_mean"]), "ccc": agreement[name].value}
                    for name in methods}
        tracer.log_event(session, "reports_written", {"cases": len(case_ids), "methods": headline})
        return CommandResult.ok(
            f"Evaluated {len(methods)} methods on {len(case_ids)} cases; reports in {out_dir}",
            cases=len(case_ids),
            methods=headline,
            reference=reference,
            n_points=int(np.sum([len(f) for f in pooled[reference]])),
        )
