import math
from dataclasses import dataclass
from typing import List, Mapping

import numpy as np

from bisformer.autodiff import tensor as ad
from bisformer.autodiff.tensor import Node, Operand
from bisformer.core.errors import ShapeMismatch

MASK_VALUE = -1e9


@dataclass
class AttentionOutput:
    output: Node
    weights: Node
    head_weights: List[Node]


def causal_mask(steps: int) -> np.ndarray:
    upper = np.triu(np.ones((steps, steps), dtype=bool), k=1)
    return np.where(upper, MASK_VALUE, 0.0)


def interpretable_attention(
    z: Operand,
    weights: Mapping[str, Node],
    num_heads: int,
    prefix: str = "attn",
    last_step_only: bool = False,
) -> AttentionOutput:
    """Multi-head attention whose heads share one value projection.

    Per-head scaled dot-product softmax weights are averaged and applied once to
    z W_V, then mapped back by W_H. Position t only attends to positions <= t.
    With `last_step_only` only the final query row is computed; it equals the last
    row of the full result.
    """
    z = ad.lift(z)
    if z.ndim != 3:
        raise ShapeMismatch(f"attention input must be (N, T, d), got {z.shape}", op="attention")
    n, steps, width = z.shape
    if weights[f"{prefix}.wv"].shape[0] != width:
        raise ShapeMismatch(f"attention width {width} != {weights[f'{prefix}.wv'].shape[0]}", op="attention")

    queries = z[:, steps - 1:steps, :] if last_step_only else z
    mask = None if last_step_only else causal_mask(steps)

    heads: List[Node] = []
    for h in range(num_heads):
        w_q = weights[f"{prefix}.wq{h}"]
        w_k = weights[f"{prefix}.wk{h}"]
        scale = 1.0 / math.sqrt(w_q.shape[-1])
        q = ad.matmul(queries, w_q)
        k = ad.matmul(z, w_k)
        scores = ad.matmul(q, ad.swapaxes(k, -1, -2)) * scale
        if mask is not None:
            scores = scores + mask
        heads.append(ad.softmax(scores, axis=-1))

    averaged = heads[0]
    for head in heads[1:]:
        averaged = averaged + head
    if num_heads > 1:
        averaged = averaged * (1.0 / num_heads)

    values = ad.matmul(z, weights[f"{prefix}.wv"])
    mixed = ad.matmul(averaged, values)
    output = ad.matmul(mixed, weights[f"{prefix}.wh"])
    return AttentionOutput(output=output, weights=averaged, head_weights=heads)
