from bisformer.commands.base import BaseCommand
from bisformer.commands.manager import COMMAND_REGISTRY, CommandManager

__all__ = ["BaseCommand", "COMMAND_REGISTRY", "CommandManager"]
