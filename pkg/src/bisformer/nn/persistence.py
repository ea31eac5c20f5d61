import logging
from pathlib import Path
from typing import Union

import numpy as np

from bisformer.core.config import ModelConfig
from bisformer.core.errors import DataIoError, ModelFormatError
from bisformer.nn.weights import ModelWeights
from bisformer.utils.binary import pack_container, unpack_container
from bisformer.utils.files import write_bytes_atomic

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"BISF"


def encode_model(weights: ModelWeights) -> bytes:
    header = {
        "kind": "bisformer-model",
        "config": weights.config.model_dump(),
        "target_mean": weights.target_mean,
        "target_scale": weights.target_scale,
        "norms": weights.norms,
    }
    return pack_container(MODEL_MAGIC, header, weights.arrays())


def decode_model(payload: bytes) -> ModelWeights:
    header, arrays = unpack_container(payload, MODEL_MAGIC, ModelFormatError)
    try:
        config = ModelConfig(**header["config"])
        target_mean = float(header["target_mean"])
        target_scale = float(header["target_scale"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"invalid model header: {e}")
    for name, array in arrays.items():
        if not np.all(np.isfinite(array)):
            raise ModelFormatError(f"parameter {name} is not finite", name=name)
    return ModelWeights.from_arrays(config, arrays, target_mean, target_scale, header.get("norms") or {})


def save_model(path: Union[str, Path], weights: ModelWeights) -> Path:
    path = write_bytes_atomic(path, encode_model(weights))
    logger.info(f"Saved model with {len(weights)} tensors to {path}")
    return path


def load_model(path: Union[str, Path]) -> ModelWeights:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise DataIoError(f"cannot read model file {path}: {e}")
    return decode_model(payload)
