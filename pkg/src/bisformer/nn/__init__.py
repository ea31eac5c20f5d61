from bisformer.nn.attention import AttentionOutput, causal_mask, interpretable_attention
from bisformer.nn.grn import grn_forward
from bisformer.nn.inference import StreamStep, predict_series, stream_predict
from bisformer.nn.layers import activation_primitives, affine, bottleneck, elu, glu, layer_norm
from bisformer.nn.lstm import lstm_step, run_lstm
from bisformer.nn.model import EncoderOutput, ModelOutput, encoder_forward, model_forward
from bisformer.nn.optim import Adam
from bisformer.nn.persistence import decode_model, encode_model, load_model, save_model
from bisformer.nn.train import FitResult, evaluate_objective, fit
from bisformer.nn.weights import ModelWeights, init_weights, parameter_shapes

__all__ = [
    "Adam",
    "AttentionOutput",
    "EncoderOutput",
    "FitResult",
    "ModelOutput",
    "ModelWeights",
    "StreamStep",
    "activation_primitives",
    "affine",
    "bottleneck",
    "causal_mask",
    "decode_model",
    "elu",
    "encode_model",
    "encoder_forward",
    "evaluate_objective",
    "fit",
    "glu",
    "grn_forward",
    "init_weights",
    "interpretable_attention",
    "layer_norm",
    "load_model",
    "lstm_step",
    "model_forward",
    "parameter_shapes",
    "predict_series",
    "run_lstm",
    "save_model",
    "stream_predict",
]
