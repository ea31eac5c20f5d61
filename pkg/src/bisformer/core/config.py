import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from bisformer.core.errors import ConfigError


class Settings(BaseSettings):
    data_dir: Path = Field(Path("data"))
    log_level: str = Field("INFO")
    jobs: int = Field(1)
    seed: int = Field(42)
    trace_enabled: bool = Field(True)

    model_config = SettingsConfigDict(
        env_prefix="BISFORMER_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    @field_validator('jobs')
    @classmethod
    def validate_jobs(cls, v: int) -> int:
        if v < 1:
            raise ValueError("jobs must be at least 1")
        return v

    @field_validator('log_level')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level '{v}'")
        return level


class ModelConfig(BaseModel):
    lstm_hidden: int = 64
    grn_hidden: int = 64
    num_heads: int = 4
    bottleneck_widths: List[int] = Field(default_factory=lambda: [64, 32, 1])
    sequence_length: int = 180
    static_dim: int = 4
    dropout_rate: float = 0.0
    variant: Literal["full", "lstm"] = "full"
    use_pseudo_bis: bool = True
    use_grn: bool = True
    use_attention: bool = True

    model_config = {"frozen": True}

    @field_validator('lstm_hidden', 'grn_hidden', 'num_heads', 'sequence_length', 'static_dim')
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator('bottleneck_widths')
    @classmethod
    def validate_widths(cls, v: List[int]) -> List[int]:
        if len(v) != 3 or any(w < 1 for w in v):
            raise ValueError("bottleneck_widths must be three positive integers")
        if v[-1] != 1:
            raise ValueError("bottleneck must end in a single output unit")
        return v

    @field_validator('dropout_rate')
    @classmethod
    def validate_dropout(cls, v: float) -> float:
        if not 0.0 <= v < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        return v

    @model_validator(mode="after")
    def validate_heads(self) -> "ModelConfig":
        if self.grn_hidden % self.num_heads != 0:
            raise ValueError("grn_hidden must be divisible by num_heads")
        return self

    @property
    def is_lstm_baseline(self) -> bool:
        return self.variant == "lstm"

    @property
    def encoder_streams(self) -> int:
        return 3 if self.use_pseudo_bis and not self.is_lstm_baseline else 2

    @classmethod
    def lstm_baseline(cls, **overrides: Any) -> "ModelConfig":
        return cls(variant="lstm", use_pseudo_bis=False, use_grn=False, use_attention=False, **overrides)


class TrainConfig(BaseModel):
    batch_size: int = 1024
    micro_batch: int = 128
    lr: float = 0.03
    lr_decay: float = 0.1
    decay_every: int = 10
    epochs: int = 30
    lambda_h: float = 5.0
    lambda_w: float = 10.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 42
    reweight: bool = True

    @field_validator('batch_size', 'micro_batch', 'decay_every')
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator('epochs')
    @classmethod
    def validate_epochs(cls, v: int) -> int:
        if v < 0:
            raise ValueError("epochs must be non-negative")
        return v

    @field_validator('lr', 'adam_eps')
    @classmethod
    def validate_lr(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator('lambda_h', 'lambda_w')
    @classmethod
    def validate_lambda(cls, v: float) -> float:
        if v < 0:
            raise ValueError("loss weights must be non-negative")
        return v

    @field_validator('beta1', 'beta2', 'lr_decay')
    @classmethod
    def validate_unit(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("must lie in (0, 1]")
        return v

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch // self.decay_every)


class LdsConfig(BaseModel):
    sigma: float = 2.0
    radius: int = 4
    w_cap: float = 50.0

    @field_validator('sigma', 'w_cap')
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator('radius')
    @classmethod
    def validate_radius(cls, v: int) -> int:
        if v < 1:
            raise ValueError("radius must be at least 1")
        return v


class SynthConfig(BaseModel):
    n_cases: int = 32
    duration_range: Tuple[int, int] = (3000, 5400)
    seed: int = 42
    noise_sd: float = 2.0
    perturbation_range: Tuple[float, float] = (0.8, 1.25)
    age_range: Tuple[float, float] = (17.0, 82.0)
    weight_range: Tuple[float, float] = (37.9, 98.1)
    height_range: Tuple[float, float] = (138.8, 186.6)
    age_mean_sd: Tuple[float, float] = (56.1, 14.0)
    weight_mean_sd: Tuple[float, float] = (61.5, 10.2)
    height_mean_sd: Tuple[float, float] = (163.2, 8.2)
    male_fraction: float = 113 / 180

    @field_validator('n_cases')
    @classmethod
    def validate_cases(cls, v: int) -> int:
        if v < 1:
            raise ValueError("n_cases must be at least 1")
        return v

    @field_validator('noise_sd')
    @classmethod
    def validate_noise(cls, v: float) -> float:
        if v < 0:
            raise ValueError("noise_sd must be non-negative")
        return v

    @field_validator('duration_range')
    @classmethod
    def validate_duration(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        lo, hi = v
        if lo < 1800 or hi < lo:
            raise ValueError("duration_range must satisfy 1800 <= lo <= hi")
        return v

    @field_validator('perturbation_range', 'age_range', 'weight_range', 'height_range')
    @classmethod
    def validate_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if v[1] < v[0]:
            raise ValueError("range upper bound below lower bound")
        return v


class SplitConfig(BaseModel):
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2

    @field_validator('train', 'val', 'test')
    @classmethod
    def validate_fraction(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("split fractions must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def validate_total(self) -> "SplitConfig":
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        return self


def load_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a JSON object")
    return data


def merge_layers(*layers: Dict[str, Any]) -> Dict[str, Any]:
    # later layers win; None means "not given"
    merged: Dict[str, Any] = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    return merged


class RunConfig(BaseModel):
    """Everything one command run resolved to; echoed as effective_config.json."""

    command: str
    data_dir: Path
    output_dir: Path
    seed: int = 42
    jobs: int = 1
    synth: SynthConfig = Field(default_factory=SynthConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    lds: LdsConfig = Field(default_factory=LdsConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    options: Dict[str, Any] = Field(default_factory=dict)

    @field_validator('jobs')
    @classmethod
    def validate_jobs(cls, v: int) -> int:
        if v < 1:
            raise ValueError("jobs must be at least 1")
        return v

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


SECTIONS = ("synth", "model", "train", "lds", "split")


def resolve_run_config(
    command: str,
    settings: Settings,
    file_layer: Dict[str, Any],
    flags: Dict[str, Any],
    sections: Optional[Dict[str, Dict[str, Any]]] = None,
) -> RunConfig:
    """Defaults < settings/environment < config file < CLI flags; None never overrides."""
    sections = sections or {}
    top = merge_layers(
        {"data_dir": settings.data_dir, "seed": settings.seed, "jobs": settings.jobs},
        {k: v for k, v in file_layer.items() if k not in SECTIONS},
        flags,
    )
    resolved: Dict[str, Any] = {"command": command, **top}
    for name in SECTIONS:
        file_section = file_layer.get(name) or {}
        if not isinstance(file_section, dict):
            raise ConfigError(f"config section '{name}' must be a JSON object")
        resolved[name] = merge_layers(file_section, sections.get(name, {}))
    # one seed drives every random stream
    for name in ("synth", "train"):
        resolved[name]["seed"] = resolved.get("seed", settings.seed)
    if "output_dir" not in resolved:
        resolved["output_dir"] = Path(resolved["data_dir"]) / command
    try:
        return RunConfig(**resolved)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"invalid configuration at {where}: {first['msg']}", errors=len(e.errors()))
