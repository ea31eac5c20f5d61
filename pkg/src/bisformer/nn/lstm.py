from typing import List, Tuple

import numpy as np

from bisformer.autodiff import tensor as ad
from bisformer.autodiff.tensor import Node, Operand
from bisformer.core.errors import ShapeMismatch

# gate blocks of the fused pre-activation, in column order
GATE_ORDER = ("input", "forget", "cell", "output")


def lstm_step(
    x: Operand, h: Operand, c: Operand, w_x: Node, w_h: Node, b: Node
) -> Tuple[Node, Node]:
    """One LSTM cell update with gates laid out as [i, f, g, o] along the last axis."""
    x, h, c = ad.lift(x), ad.lift(h), ad.lift(c)
    hidden = w_h.shape[0]
    if w_x.shape[-1] != 4 * hidden or w_h.shape != (hidden, 4 * hidden) or b.shape != (4 * hidden,):
        raise ShapeMismatch(
            f"lstm weights inconsistent: w_x {w_x.shape}, w_h {w_h.shape}, b {b.shape}", op="lstm"
        )
    if x.shape[-1] != w_x.shape[0] or h.shape[-1] != hidden or c.shape != h.shape:
        raise ShapeMismatch(f"lstm inputs x {x.shape}, h {h.shape}, c {c.shape}", op="lstm")

    z = ad.matmul(x, w_x) + ad.matmul(h, w_h) + b
    i = ad.sigmoid(z[..., 0:hidden])
    f = ad.sigmoid(z[..., hidden:2 * hidden])
    g = ad.tanh(z[..., 2 * hidden:3 * hidden])
    o = ad.sigmoid(z[..., 3 * hidden:4 * hidden])
    c_next = f * c + i * g
    h_next = o * ad.tanh(c_next)
    return h_next, c_next


def run_lstm(inputs: np.ndarray, w_x: Node, w_h: Node, b: Node) -> Tuple[Node, Node]:
    """Unroll a single-layer LSTM over (N, T) or (N, T, F) inputs from zero state.

    Returns the hidden states stacked as (N, T, H) and the final hidden state (N, H).
    """
    xs = np.asarray(inputs, dtype=np.float64)
    if xs.ndim == 2:
        xs = xs[..., None]
    if xs.ndim != 3:
        raise ShapeMismatch(f"lstm input must be (N, T) or (N, T, F), got {xs.shape}", op="lstm")
    n, steps, _ = xs.shape
    hidden = w_h.shape[0]
    h: Node = ad.constant(np.zeros((n, hidden)))
    c: Node = ad.constant(np.zeros((n, hidden)))
    states: List[Node] = []
    for t in range(steps):
        # inputs are data, so each step gets its own constant instead of a slice of one graph node
        h, c = lstm_step(ad.constant(xs[:, t, :]), h, c, w_x, w_h, b)
        states.append(h)
    return ad.stack(states, axis=1), h
