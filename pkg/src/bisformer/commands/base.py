import argparse
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from bisformer.core.config import RunConfig, Settings, load_config_file, resolve_run_config
from bisformer.core.errors import DataIoError
from bisformer.core.models import CommandResult
from bisformer.core.tracer import RunSession, RunTracer
from bisformer.utils.json_store import write_json_file

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG_FILE = "effective_config.json"


class BaseCommand(ABC):
    help: str = ""

    def __init__(self, settings: Settings):
        self.settings = settings

    @staticmethod
    @abstractmethod
    def get_command_name() -> str:
        pass

    @abstractmethod
    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        pass

    @abstractmethod
    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        pass

    def flags(self, args: argparse.Namespace) -> Dict[str, Any]:
        """Top-level RunConfig values given on the command line."""
        return {
            "data_dir": getattr(args, "data_dir", None),
            "output_dir": getattr(args, "out", None),
            "seed": getattr(args, "seed", None),
            "jobs": getattr(args, "jobs", None),
        }

    def sections(self, args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
        return {}

    def options(self, args: argparse.Namespace) -> Dict[str, Any]:
        return {}

    def resolve(self, args: argparse.Namespace) -> RunConfig:
        file_layer = load_config_file(getattr(args, "config", None))
        config = resolve_run_config(
            self.get_command_name(), self.settings, file_layer, self.flags(args), self.sections(args)
        )
        return config.model_copy(update={"options": {**config.options, **self.options(args)}})

    def run(self, args: argparse.Namespace) -> CommandResult:
        config = self.resolve(args)
        logger.info(f"Running {config.command} into {config.output_dir}")
        return self.execute(config, args)

    def tracer(self, config: RunConfig) -> RunTracer:
        return RunTracer(config.output_dir, enabled=self.settings.trace_enabled)

    def start_trace(self, config: RunConfig) -> Tuple[RunTracer, Optional[RunSession]]:
        tracer = self.tracer(config)
        return tracer, tracer.start_session(config.command, config.echo())

    def write_effective_config(self, config: RunConfig) -> Path:
        path = Path(config.output_dir) / EFFECTIVE_CONFIG_FILE
        error = write_json_file(str(path), config.echo())
        if error:
            raise DataIoError(error)
        return path


def add_common_arguments(parser: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        parser.add_argument('--data-dir', type=Path, default=None, help="Data directory (default $BISFORMER_DATA_DIR)")
    parser.add_argument('--out', type=Path, default=None, help="Output directory")
    parser.add_argument('--seed', type=int, default=None, help="Seed for every random stream")
    parser.add_argument('--jobs', type=int, default=None, help="Worker processes for per-case stages")
    parser.add_argument('--config', type=Path, default=None, help="JSON config file")
