from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from bisformer.autodiff import tensor as ad
from bisformer.autodiff.tensor import Node
from bisformer.core.errors import ShapeMismatch
from bisformer.datapipe.schema import SampleBatch
from bisformer.nn.attention import AttentionOutput, interpretable_attention
from bisformer.nn.grn import grn_forward
from bisformer.nn.layers import affine, bottleneck
from bisformer.nn.lstm import run_lstm
from bisformer.nn.weights import ModelWeights, stream_names


@dataclass
class EncoderOutput:
    z_enc: Node
    history: Optional[Node]
    final_states: List[Node]


@dataclass
class ModelOutput:
    """`prediction` and `history` are in normalized BIS units; `bis` is de-normalized and clipped to [0, 100]."""

    prediction: Node
    history: Optional[Node]
    bis: np.ndarray
    attention: Optional[AttentionOutput] = None


def _bottleneck_params(weights: ModelWeights, prefix: str):
    n = len(weights.config.bottleneck_widths)
    return (
        [weights[f"{prefix}.w{i}"] for i in range(n)],
        [weights[f"{prefix}.b{i}"] for i in range(n)],
    )


def encoder_forward(x_drug: np.ndarray, x_pseudo: np.ndarray, weights: ModelWeights) -> EncoderOutput:
    """Run the per-stream LSTMs and the history-correcting bottleneck.

    x_drug is (N, T, 2) normalized rates, x_pseudo (N, T). Z_enc concatenates the
    stream states in order propofol, remifentanil, pseudo-BIS.
    """
    x_drug = np.asarray(x_drug, dtype=np.float64)
    x_pseudo = np.asarray(x_pseudo, dtype=np.float64)
    if x_drug.ndim == 2:
        x_drug, x_pseudo = x_drug[None], x_pseudo[None]
    if x_drug.ndim != 3 or x_drug.shape[-1] != 2 or x_pseudo.shape != x_drug.shape[:2]:
        raise ShapeMismatch(f"encoder inputs {x_drug.shape} / {x_pseudo.shape}", op="encoder")

    inputs = {"ppf": x_drug[..., 0], "rftn": x_drug[..., 1], "pseudo": x_pseudo}
    states: List[Node] = []
    finals: List[Node] = []
    for stream in stream_names(weights.config):
        seq, last = run_lstm(
            inputs[stream],
            weights[f"lstm_{stream}.w_x"],
            weights[f"lstm_{stream}.w_h"],
            weights[f"lstm_{stream}.b"],
        )
        states.append(seq)
        finals.append(last)
    z_enc = states[0] if len(states) == 1 else ad.concat(states, axis=-1)

    history = None
    if "enc_bn.w0" in weights:
        n, steps, _ = z_enc.shape
        history = ad.reshape(bottleneck(z_enc, *_bottleneck_params(weights, "enc_bn")), (n, steps))
    return EncoderOutput(z_enc=z_enc, history=history, final_states=finals)


def model_forward(
    batch: SampleBatch,
    weights: ModelWeights,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    return_attention: bool = False,
) -> ModelOutput:
    """Encoder, static fusion, attention decoder and output bottleneck for a batch."""
    config = weights.config
    if batch.steps != config.sequence_length:
        raise ShapeMismatch(
            f"window has {batch.steps} steps, model expects {config.sequence_length}", op="model"
        )
    encoded = encoder_forward(batch.x_drug, batch.x_pseudo, weights)
    statics = ad.constant(batch.statics)
    attention = None

    if config.is_lstm_baseline:
        decoder_in = ad.concat(encoded.final_states + [statics], axis=-1)
    else:
        fused = affine(encoded.z_enc, weights["fuse_in.w"], weights["fuse_in.b"])
        if config.use_grn:
            fused = grn_forward(fused, statics, weights.params)
        steps = fused.shape[1]
        if config.use_attention:
            attention = interpretable_attention(
                fused, weights.params, config.num_heads, last_step_only=not return_attention
            )
            out = attention.output
            beta = out[:, out.shape[1] - 1, :]
        else:
            beta = fused[:, steps - 1, :]
        decoder_in = ad.concat([beta] + encoded.final_states, axis=-1)

    if training and config.dropout_rate > 0:
        if rng is None:
            raise ValueError("dropout during training needs a seeded rng")
        keep = rng.random(decoder_in.shape) >= config.dropout_rate
        decoder_in = decoder_in * (keep / (1.0 - config.dropout_rate))

    out = bottleneck(decoder_in, *_bottleneck_params(weights, "dec_bn"))
    prediction = ad.reshape(out, (out.shape[0],))
    return ModelOutput(
        prediction=prediction,
        history=encoded.history,
        bis=np.clip(weights.denormalize(prediction.value), 0.0, 100.0),
        attention=attention,
    )
