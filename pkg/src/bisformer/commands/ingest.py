import argparse
import logging
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from bisformer.commands.base import BaseCommand, add_common_arguments
from bisformer.commands.common import parallel_map
from bisformer.core.config import RunConfig
from bisformer.core.errors import DataError, DataIoError, EmptyCase, PartialRunError, RejectedCase
from bisformer.core.models import CommandResult
from bisformer.datapipe.binning import bin_case
from bisformer.datapipe.dataset import (
    DatasetOptions,
    assign_splits,
    build_dataset,
    load_split_manifest,
    write_dataset,
)
from bisformer.datapipe.ingest import parse_and_clean
from bisformer.datapipe.schema import WINDOW_BINS, CaseSeries
from bisformer.utils.json_store import write_json_file

logger = logging.getLogger(__name__)

REJECTED_FILE = "rejected.json"

LoadResult = Tuple[Optional[CaseSeries], Optional[Dict[str, str]]]


def _load_case(path: Path) -> LoadResult:
    try:
        return bin_case(parse_and_clean(path)), None
    except RejectedCase as e:
        return None, {"file": path.name, "case_id": e.case_id, "reason": e.reason, "message": e.message}
    except EmptyCase as e:
        logger.warning(f"Rejected {path.name} (empty): {e.message}")
        return None, {"file": path.name, "case_id": path.stem, "reason": "empty", "message": e.message}


class IngestCommand(BaseCommand):
    help = "Clean, bin and window case CSVs into a dataset with splits and LDS weights"

    @staticmethod
    def get_command_name() -> str:
        return "ingest"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--cases-dir', type=Path, default=None, help="Directory of case CSVs (default <data>/synth)")
        parser.add_argument('--split', type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"), default=None,
                            help="Split fractions summing to 1")
        parser.add_argument('--split-manifest', type=Path, default=None, help="JSON mapping train/val/test to case ids")
        parser.add_argument('--sample-stride', type=int, default=None, help="Seconds between training windows")
        parser.add_argument('--window-bins', type=int, default=None, help="History length in 10 s bins")
        parser.add_argument('--lowess-frac', type=float, default=None, help="LOWESS span for training labels")
        parser.add_argument('--lds-sigma', type=float, default=None)
        parser.add_argument('--lds-radius', type=int, default=None)
        parser.add_argument('--w-cap', type=float, default=None, help="Upper bound on sample weights")
        add_common_arguments(parser)

    def sections(self, args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
        split = dict(zip(("train", "val", "test"), args.split)) if args.split else {}
        return {
            "split": split,
            "lds": {"sigma": args.lds_sigma, "radius": args.lds_radius, "w_cap": args.w_cap},
        }

    def options(self, args: argparse.Namespace) -> Dict[str, Any]:
        given = {
            "cases_dir": str(args.cases_dir) if args.cases_dir else None,
            "split_manifest": str(args.split_manifest) if args.split_manifest else None,
            "sample_stride": args.sample_stride,
            "window_bins": args.window_bins,
            "lowess_frac": args.lowess_frac,
        }
        return {k: v for k, v in given.items() if v is not None}

    def _dataset_options(self, config: RunConfig) -> DatasetOptions:
        opts = config.options
        options = DatasetOptions(
            sample_stride=int(opts.get("sample_stride", 10)),
            window_bins=int(opts.get("window_bins", WINDOW_BINS)),
            lowess_frac=float(opts.get("lowess_frac", 0.03)),
            lds=config.lds,
        )
        if options.sample_stride < 1 or options.window_bins < 1 or not 0 < options.lowess_frac <= 1:
            raise DataError("sample stride and window bins must be positive and the LOWESS span in (0, 1]")
        return options

    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        cases_dir = Path(config.options.get("cases_dir") or Path(config.data_dir) / "synth")
        if not cases_dir.is_dir():
            raise DataIoError(f"case directory {cases_dir} does not exist", path=str(cases_dir))
        manifest = config.options.get("split_manifest")
        if manifest and not Path(manifest).is_file():
            raise DataIoError(f"split manifest {manifest} does not exist", path=str(manifest))
        options = self._dataset_options(config)
        files = sorted(cases_dir.glob("*.csv"))
        if not files:
            raise DataIoError(f"no case CSVs in {cases_dir}", path=str(cases_dir))

        results = parallel_map(_load_case, files, config.jobs)
        cases = [case for case, _ in results if case is not None]
        rejected = [report for _, report in results if report is not None]
        if rejected:
            reasons = Counter(r["reason"] for r in rejected)
            logger.warning(f"Rejected {len(rejected)} of {len(files)} cases: {dict(reasons)}")
        if not cases:
            raise DataError("every case was rejected", rejected=rejected)
        ids = [c.case_id for c in cases]
        duplicates = sorted(cid for cid, n in Counter(ids).items() if n > 1)
        if duplicates:
            raise DataError(f"duplicate case ids: {duplicates}", duplicates=duplicates)

        if manifest:
            splits = load_split_manifest(manifest, ids)
        else:
            splits = assign_splits(ids, config.split, config.seed)
        dataset = build_dataset([c for c in cases if c.case_id in set().union(*splits.values())], splits, options)

        tracer, session = self.start_trace(config)
        self.write_effective_config(config)
        path = write_dataset(config.output_dir, dataset)
        error = write_json_file(str(Path(config.output_dir) / REJECTED_FILE), rejected)
        if error:
            raise DataIoError(error)
        tracer.log_event(session, "dataset_written", {
            "accepted": len(cases), "rejected": len(rejected),
            "train_windows": len(dataset.samples["train"]),
            "splits": {k: len(v) for k, v in splits.items()},
        })
        summary = {
            "dataset": str(path),
            "accepted": len(cases),
            "rejected": len(rejected),
            "splits": {k: len(v) for k, v in splits.items()},
            "train_windows": len(dataset.samples["train"]),
        }
        if rejected:
            raise PartialRunError(
                f"{len(rejected)} of {len(files)} cases rejected; dataset written from the rest",
                rejected_cases=rejected, **summary,
            )
        return CommandResult.ok(f"Ingested {len(cases)} cases into {path}", **summary)
