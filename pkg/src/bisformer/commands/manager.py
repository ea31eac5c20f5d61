import argparse
import importlib
import logging
from typing import Dict, List, Optional

from bisformer.commands.base import BaseCommand
from bisformer.core.config import Settings
from bisformer.core.errors import BisformerError
from bisformer.core.models import CommandResult

logger = logging.getLogger(__name__)


COMMAND_REGISTRY = {
    "synth": ("bisformer.commands.synth", "SynthCommand"),
    "ingest": ("bisformer.commands.ingest", "IngestCommand"),
    "train": ("bisformer.commands.train", "TrainCommand"),
    "predict": ("bisformer.commands.predict", "PredictCommand"),
    "evaluate": ("bisformer.commands.evaluate", "EvaluateCommand"),
    "baseline-pkpd": ("bisformer.commands.baseline", "BaselinePkpdCommand"),
    "plot-data": ("bisformer.commands.plot_data", "PlotDataCommand"),
}


class CommandManager:

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or Settings()
        self.commands: Dict[str, BaseCommand] = {}
        self._commands_initialized = False

    def _ensure_commands_loaded(self):
        if self._commands_initialized:
            return
        self._commands_initialized = True

        for name, (module_path, class_name) in COMMAND_REGISTRY.items():
            module = importlib.import_module(module_path)
            command_class = getattr(module, class_name)
            self.commands[name] = command_class(self.settings)

    def register_command(self, command: BaseCommand):
        self._ensure_commands_loaded()
        self.commands[command.get_command_name()] = command

    def get_command(self, name: str) -> Optional[BaseCommand]:
        self._ensure_commands_loaded()
        return self.commands.get(name)

    def command_names(self) -> List[str]:
        self._ensure_commands_loaded()
        return list(self.commands)

    def add_subparsers(self, parser: argparse.ArgumentParser) -> None:
        self._ensure_commands_loaded()
        subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
        for name, command in self.commands.items():
            sub = subparsers.add_parser(name, help=command.help, description=command.help)
            command.add_arguments(sub)

    def run(self, name: str, args: argparse.Namespace) -> CommandResult:
        command = self.get_command(name)
        if command is None:
            return CommandResult(success=False, message=f"unknown command '{name}'", exit_code=2,
                                 error={"code": "config_error", "message": f"unknown command '{name}'", "details": {}})
        try:
            return command.run(args)
        except BisformerError as e:
            logger.error(f"{name} failed [{e.code}]: {e.message}")
            return CommandResult.from_error(e)
        except Exception as e:
            logger.exception(f"{name} failed unexpectedly")
            return CommandResult.from_error(e)
