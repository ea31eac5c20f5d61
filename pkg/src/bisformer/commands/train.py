import argparse
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

from bisformer.commands.base import BaseCommand, add_common_arguments
from bisformer.commands.common import MODEL_FILE, load_dataset
from bisformer.core.config import RunConfig
from bisformer.core.errors import ConfigError, DataIoError
from bisformer.core.models import CommandResult
from bisformer.core.state import EpochRecord
from bisformer.nn.persistence import load_model, save_model
from bisformer.nn.train import fit
from bisformer.utils.files import write_frame_atomic
from bisformer.utils.json_store import write_json_file

logger = logging.getLogger(__name__)

LOSS_LOG_FILE = "loss_log.csv"
SUMMARY_FILE = "training_summary.json"
LOSS_COLUMNS = ["epoch", "lr", "objective", "history_loss", "weighted_mse", "n_batches"]


def _off(flag: bool) -> Optional[bool]:
    return False if flag else None


class TrainCommand(BaseCommand):
    help = "Train the BIS predictor on an ingested dataset and write the model file and loss log"

    @staticmethod
    def get_command_name() -> str:
        return "train"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--dataset', type=Path, default=None, help="Dataset directory (default <data>/ingest)")
        parser.add_argument('--epochs', type=int, default=None)
        parser.add_argument('--lr', type=float, default=None, help="Initial learning rate")
        parser.add_argument('--batch-size', type=int, default=None)
        parser.add_argument('--micro-batch', type=int, default=None, help="Samples per gradient accumulation step")
        parser.add_argument('--warm-start', type=Path, default=None, help="Fine-tune from an existing model file")
        parser.add_argument('--variant', choices=["full", "lstm"], default=None)
        parser.add_argument('--no-pseudo-bis', action='store_true', help="Drop the pseudo-BIS stream")
        parser.add_argument('--no-grn', action='store_true', help="Bypass the gated feature fusion")
        parser.add_argument('--no-attention', action='store_true', help="Decode from the last fused step")
        parser.add_argument('--no-reweight', action='store_true', help="Train with unit sample weights")
        add_common_arguments(parser)

    def sections(self, args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
        model: Dict[str, Any] = {
            "variant": args.variant,
            "use_pseudo_bis": _off(args.no_pseudo_bis),
            "use_grn": _off(args.no_grn),
            "use_attention": _off(args.no_attention),
        }
        if args.variant == "lstm":
            model.update(use_pseudo_bis=False, use_grn=False, use_attention=False)
        train = {
            "epochs": args.epochs,
            "lr": args.lr,
            "batch_size": args.batch_size,
            "micro_batch": args.micro_batch,
            "reweight": _off(args.no_reweight),
        }
        return {"model": model, "train": train}

    def options(self, args: argparse.Namespace) -> Dict[str, Any]:
        given = {
            "dataset": str(args.dataset) if args.dataset else None,
            "warm_start": str(args.warm_start) if args.warm_start else None,
        }
        return {k: v for k, v in given.items() if v is not None}

    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        dataset = load_dataset(config, config.options.get("dataset"))
        warm = config.options.get("warm_start")
        weights = load_model(warm) if warm else None

        model_config = config.model
        if weights is not None:
            if weights.config != model_config and config.model.model_fields_set:
                logger.warning("Warm start keeps the saved model configuration; model overrides ignored")
            model_config = weights.config
        elif "sequence_length" not in model_config.model_fields_set:
            model_config = model_config.model_copy(update={"sequence_length": dataset.options.window_bins})
        if model_config.sequence_length != dataset.options.window_bins:
            raise ConfigError(
                f"model expects {model_config.sequence_length} history bins, dataset has {dataset.options.window_bins}"
            )
        config = config.model_copy(update={"model": model_config})

        out_dir = Path(config.output_dir)
        tracer, session = self.start_trace(config)
        self.write_effective_config(config)

        def on_epoch(record: EpochRecord) -> None:
            tracer.log_event(session, "epoch", record.model_dump())

        data = dataset.windows("train")
        norms = dataset.norms
        with tracer.stage(session, "fit") as stage:
            result = fit(
                data, model_config, config.train, weights=weights,
                target_stats=(norms.bis_mean, norms.bis_scale), on_epoch=on_epoch,
            )
            stage["samples"] = len(data)
        trained = result.weights
        trained.norms = norms.model_dump()
        model_file = save_model(out_dir / MODEL_FILE, trained)

        write_frame_atomic(out_dir / LOSS_LOG_FILE, pd.DataFrame(result.log.to_rows(), columns=LOSS_COLUMNS))
        summary = {
            "model": str(model_file),
            "samples": len(data),
            "epochs": config.train.epochs,
            "initial_objective": result.log.initial_objective,
            "final_objective": result.log.final_objective,
            "warm_start": warm,
        }
        error = write_json_file(str(out_dir / SUMMARY_FILE), summary)
        if error:
            raise DataIoError(error)
        tracer.log_event(session, "model_written", summary)
        return CommandResult.ok(f"Trained on {len(data)} windows; model written to {model_file}", **summary)
