from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from bisformer.autodiff.tensor import Node, parameter
from bisformer.core.config import ModelConfig
from bisformer.core.errors import ModelFormatError

STREAMS = ("ppf", "rftn", "pseudo")
SEED_MASK = 0xFFFFFFFFFFFFFFFF

Shape = Tuple[int, ...]


def stream_names(config: ModelConfig) -> Tuple[str, ...]:
    return STREAMS[:config.encoder_streams]


def decoder_input_width(config: ModelConfig) -> int:
    encoded = config.encoder_streams * config.lstm_hidden
    if config.is_lstm_baseline:
        return encoded + config.static_dim
    return encoded + config.grn_hidden


def _bottleneck_shapes(prefix: str, fan_in: int, widths: List[int]) -> List[Tuple[str, Shape]]:
    shapes = []
    for i, width in enumerate(widths):
        shapes.append((f"{prefix}.w{i}", (fan_in, width)))
        shapes.append((f"{prefix}.b{i}", (width,)))
        fan_in = width
    return shapes


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, Shape]":
    """Ordered name -> shape manifest; the order is the serialization order."""
    hidden = config.lstm_hidden
    d = config.grn_hidden
    encoded = config.encoder_streams * hidden
    shapes: List[Tuple[str, Shape]] = []

    for stream in stream_names(config):
        shapes += [
            (f"lstm_{stream}.w_x", (1, 4 * hidden)),
            (f"lstm_{stream}.w_h", (hidden, 4 * hidden)),
            (f"lstm_{stream}.b", (4 * hidden,)),
        ]
    if "pseudo" in stream_names(config):
        shapes += _bottleneck_shapes("enc_bn", encoded, config.bottleneck_widths)

    if not config.is_lstm_baseline:
        shapes += [("fuse_in.w", (encoded, d)), ("fuse_in.b", (d,))]
        if config.use_grn:
            shapes += [
                ("grn.w2", (d, d)),
                ("grn.b2", (d,)),
                ("grn.w3", (config.static_dim, d)),
                ("grn.w1", (d, d)),
                ("grn.b1", (d,)),
                ("grn.w4", (d, d)),
                ("grn.b4", (d,)),
                ("grn.w5", (d, d)),
                ("grn.b5", (d,)),
                ("grn.ln_scale", (d,)),
                ("grn.ln_shift", (d,)),
            ]
        if config.use_attention:
            d_attn = d // config.num_heads
            for h in range(config.num_heads):
                shapes += [(f"attn.wq{h}", (d, d_attn)), (f"attn.wk{h}", (d, d_attn))]
            shapes += [("attn.wv", (d, d_attn)), ("attn.wh", (d_attn, d))]

    shapes += _bottleneck_shapes("dec_bn", decoder_input_width(config), config.bottleneck_widths)
    return OrderedDict(shapes)


@dataclass
class ModelWeights:
    """Named parameters plus what is needed to map outputs back to BIS units."""

    config: ModelConfig
    params: "OrderedDict[str, Node]"
    target_mean: float = 0.0
    target_scale: float = 1.0
    norms: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Node:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def nodes(self) -> List[Node]:
        return list(self.params.values())

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, node.value.copy()) for name, node in self.params.items())

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.target_scale + self.target_mean

    def normalize(self, bis: np.ndarray) -> np.ndarray:
        return (np.asarray(bis, dtype=np.float64) - self.target_mean) / self.target_scale

    def copy(self) -> "ModelWeights":
        return ModelWeights.from_arrays(
            self.config, self.arrays(), self.target_mean, self.target_scale, dict(self.norms)
        )

    @classmethod
    def from_arrays(
        cls,
        config: ModelConfig,
        arrays: Dict[str, np.ndarray],
        target_mean: float = 0.0,
        target_scale: float = 1.0,
        norms: Optional[Dict[str, Any]] = None,
    ) -> "ModelWeights":
        expected = parameter_shapes(config)
        if set(arrays) != set(expected):
            missing = sorted(set(expected) - set(arrays))
            extra = sorted(set(arrays) - set(expected))
            raise ModelFormatError("parameter set does not match config", missing=missing, extra=extra)
        params: "OrderedDict[str, Node]" = OrderedDict()
        for name, shape in expected.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != shape:
                raise ModelFormatError(
                    f"parameter {name} has shape {value.shape}, expected {shape}", name=name
                )
            params[name] = parameter(value, name=name)
        if not target_scale > 0:
            raise ModelFormatError("target_scale must be positive")
        return cls(config, params, float(target_mean), float(target_scale), dict(norms or {}))


def _initial_value(name: str, shape: Shape, rng: np.random.Generator, hidden: int) -> np.ndarray:
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "ln_scale":
        return np.ones(shape)
    if leaf == "ln_shift":
        return np.zeros(shape)
    if len(shape) == 1:
        bias = np.zeros(shape)
        if name.startswith("lstm_"):
            bias[hidden:2 * hidden] = 1.0
        return bias
    bound = 1.0 / np.sqrt(shape[0])
    return rng.uniform(-bound, bound, size=shape)


def init_weights(
    config: ModelConfig,
    seed: int,
    target_mean: float = 0.0,
    target_scale: float = 1.0,
) -> ModelWeights:
    """Uniform(+-1/sqrt(fan_in)) matrices, zero biases except LSTM forget gates (1.0)."""
    rng = np.random.default_rng(seed & SEED_MASK)
    arrays = OrderedDict(
        (name, _initial_value(name, shape, rng, config.lstm_hidden))
        for name, shape in parameter_shapes(config).items()
    )
    return ModelWeights.from_arrays(config, arrays, target_mean, target_scale)
