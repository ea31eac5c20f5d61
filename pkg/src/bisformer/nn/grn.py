from typing import Mapping, Optional

from bisformer.autodiff import tensor as ad
from bisformer.autodiff.tensor import Node, Operand
from bisformer.core.errors import ShapeMismatch
from bisformer.nn.layers import affine, elu, glu, layer_norm


def _broadcast_context(c: Node, like: Node) -> Node:
    # static context (N, d) repeated over every time step of (N, T, d)
    if like.ndim == 3:
        n, steps, width = like.shape
        return ad.broadcast_to(ad.reshape(c, (n, 1, width)), (n, steps, width))
    return c


def grn_forward(
    a: Operand,
    c: Optional[Operand],
    weights: Mapping[str, Node],
    prefix: str = "grn",
) -> Node:
    """Gated residual block fusing per-step features `a` with static context `c`.

    eta2 = ELU(a W2 + b2 + c W3), eta1 = eta2 W1 + b1,
    out = LayerNorm(a + (eta1 W5 + b5) * sigmoid(eta1 W4 + b4)).
    """
    a = ad.lift(a)

    def w(name: str) -> Node:
        return weights[f"{prefix}.{name}"]

    if a.shape[-1] != w("w2").shape[0]:
        raise ShapeMismatch(f"grn input width {a.shape[-1]} != {w('w2').shape[0]}", op="grn")

    pre = affine(a, w("w2"), w("b2"))
    if c is not None:
        c = ad.lift(c)
        if c.ndim != 2 or c.shape[0] != a.shape[0] or c.shape[1] != w("w3").shape[0]:
            raise ShapeMismatch(f"grn context {c.shape} does not fit input {a.shape}", op="grn")
        pre = pre + _broadcast_context(affine(c, w("w3")), a)
    eta2 = elu(pre)
    eta1 = affine(eta2, w("w1"), w("b1"))
    gated = glu(affine(eta1, w("w5"), w("b5")), affine(eta1, w("w4"), w("b4")))
    return layer_norm(a + gated, w("ln_scale"), w("ln_shift"))
