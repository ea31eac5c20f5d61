from typing import Sequence

from bisformer.autodiff import tensor as ad
from bisformer.autodiff.tensor import Node, Operand
from bisformer.core.errors import ShapeMismatch

LAYER_NORM_EPS = 1e-5


def affine(x: Operand, w: Node, b: Node = None) -> Node:
    out = ad.matmul(x, w)
    return out if b is None else out + b


def elu(x: Operand) -> Node:
    return ad.elu(x)


def glu(value: Operand, gate: Operand) -> Node:
    return ad.mul(value, ad.sigmoid(gate))


def layer_norm(x: Operand, scale: Operand, shift: Operand, eps: float = LAYER_NORM_EPS) -> Node:
    x = ad.lift(x)
    mu = ad.broadcast_to(ad.mean(x, axis=-1, keepdims=True), x.shape)
    centered = x - mu
    var = ad.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = ad.broadcast_to(ad.power(var + eps, -0.5), x.shape)
    return centered * inv_std * scale + shift


def activation_primitives(kind: str, *inputs: Operand) -> Node:
    if kind == "elu":
        (x,) = inputs
        return elu(x)
    if kind == "glu":
        if len(inputs) == 1:
            x = ad.lift(inputs[0])
            if x.shape[-1] % 2:
                raise ShapeMismatch("glu needs an even last dimension to split into value/gate")
            half = x.shape[-1] // 2
            return glu(x[..., :half], x[..., half:])
        value, gate = inputs
        return glu(value, gate)
    if kind == "layer_norm":
        x, scale, shift = inputs
        return layer_norm(x, scale, shift)
    raise ValueError(f"unknown activation '{kind}'")


def bottleneck(x: Operand, weights: Sequence[Node], biases: Sequence[Node]) -> Node:
    """Three affine layers with ELU between them."""
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = affine(h, w, b)
        if i < last:
            h = elu(h)
    return h
