from bisformer.core.config import (
    LdsConfig,
    ModelConfig,
    RunConfig,
    Settings,
    SplitConfig,
    SynthConfig,
    TrainConfig,
    resolve_run_config,
)
from bisformer.core.errors import BisformerError
from bisformer.core.models import CommandResult
from bisformer.core.state import EpochRecord, TrainingLog
from bisformer.core.tracer import RunTracer

__all__ = [
    "BisformerError",
    "CommandResult",
    "EpochRecord",
    "LdsConfig",
    "ModelConfig",
    "RunConfig",
    "RunTracer",
    "Settings",
    "SplitConfig",
    "SynthConfig",
    "TrainConfig",
    "TrainingLog",
    "resolve_run_config",
]
