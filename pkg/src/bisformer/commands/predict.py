import argparse
import logging
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from bisformer.commands.base import BaseCommand, add_common_arguments
from bisformer.commands.common import (
    load_dataset,
    model_path,
    parallel_map,
    prediction_frame,
    split_case_ids,
    write_predictions,
)
from bisformer.core.config import RunConfig
from bisformer.core.errors import DataIoError
from bisformer.core.models import CommandResult
from bisformer.datapipe.schema import CaseSeries, Normalization
from bisformer.datapipe.windows import build_windows
from bisformer.nn.inference import predict_series, stream_predict
from bisformer.nn.persistence import load_model
from bisformer.nn.weights import ModelWeights
from bisformer.utils.files import write_frame_atomic
from bisformer.utils.json_store import write_json_file

logger = logging.getLogger(__name__)

LATENCY_FILE = "latency.csv"
SUMMARY_FILE = "predict_summary.json"

CaseInput = Tuple[CaseSeries, np.ndarray]


def _predict_case(item: CaseInput, weights: ModelWeights, norms: Normalization) -> pd.DataFrame:
    case, pseudo = item
    windows = build_windows(case, pseudo, norms, window_bins=weights.config.sequence_length)
    return prediction_frame(windows.times, windows.y_target, predict_series(weights, windows))


def _stream_case(item: CaseInput, weights: ModelWeights, norms: Normalization) -> Tuple[pd.DataFrame, pd.DataFrame]:
    case, pseudo = item
    steps = list(stream_predict(weights, case, pseudo, norms))
    times = np.array([s.t for s in steps], dtype=np.int64)
    frame = prediction_frame(times, case.bis[times], [s.bis for s in steps])
    latency = pd.DataFrame({
        "case_id": case.case_id,
        "t": times,
        "latency_s": [s.latency_s for s in steps],
    })
    return frame, latency


class PredictCommand(BaseCommand):
    help = "Predict per-second BIS for the cases of a split with a trained model"

    @staticmethod
    def get_command_name() -> str:
        return "predict"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--dataset', type=Path, default=None, help="Dataset directory (default <data>/ingest)")
        parser.add_argument('--model', type=Path, default=None, help="Model file (default <data>/train/model.bisf)")
        parser.add_argument('--split', choices=["train", "val", "test", "all"], default="test")
        parser.add_argument('--stream', action='store_true',
                            help="Replay each case one second at a time and time every prediction")
        add_common_arguments(parser)

    def options(self, args: argparse.Namespace) -> Dict[str, Any]:
        given = {
            "dataset": str(args.dataset) if args.dataset else None,
            "model": str(args.model) if args.model else None,
            "split": args.split,
            "stream": args.stream,
        }
        return {k: v for k, v in given.items() if v is not None}

    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        path = model_path(config, config.options.get("model"))
        if not path.is_file():
            raise DataIoError(f"model file {path} does not exist", path=str(path))
        weights = load_model(path)
        dataset = load_dataset(config, config.options.get("dataset"))
        norms = Normalization(**weights.norms) if weights.norms else dataset.norms
        case_ids = split_case_ids(dataset, config.options.get("split", "test"))
        items: List[CaseInput] = [(dataset.cases[cid], dataset.pseudo[cid]) for cid in case_ids]

        out_dir = Path(config.output_dir)
        tracer, session = self.start_trace(config)
        self.write_effective_config(config)

        summary: Dict[str, Any] = {"model": str(path), "cases": len(case_ids), "stream": bool(config.options.get("stream"))}
        if config.options.get("stream"):
            # one process, so latencies are not distorted by competing workers
            results = [_stream_case(item, weights, norms) for item in items]
            frames = [frame for frame, _ in results]
            latency = pd.concat([lat for _, lat in results], ignore_index=True) if results else pd.DataFrame(
                columns=["case_id", "t", "latency_s"]
            )
            write_frame_atomic(out_dir / LATENCY_FILE, latency)
            if len(latency):
                summary["median_latency_s"] = float(np.median(latency["latency_s"]))
                summary["max_latency_s"] = float(latency["latency_s"].max())
                tracer.log_event(session, "stream_latency", {
                    "median_s": summary["median_latency_s"], "steps": len(latency),
                })
        else:
            worker = partial(_predict_case, weights=weights, norms=norms)
            with tracer.stage(session, "batch_predict") as stage:
                frames = parallel_map(worker, items, config.jobs)
                stage["cases"] = len(items)

        for cid, frame in zip(case_ids, frames):
            write_predictions(out_dir, cid, frame)
        summary["points"] = int(sum(len(f) for f in frames))
        error = write_json_file(str(out_dir / SUMMARY_FILE), summary)
        if error:
            raise DataIoError(error)
        tracer.log_event(session, "predictions_written", summary)
        message = f"Wrote predictions for {len(case_ids)} cases to {out_dir}"
        if "median_latency_s" in summary:
            message += f" (median step latency {summary['median_latency_s'] * 1000:.1f} ms)"
        return CommandResult.ok(message, **summary)
