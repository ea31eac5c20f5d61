from typing import Optional

import numpy as np

from bisformer.autodiff import tensor as ad
from bisformer.autodiff.tensor import Node, Operand
from bisformer.core.errors import NonFiniteInput, ShapeMismatch
from bisformer.imbalance.lds import WeightTable


def _check_shapes(pred: Node, true: Node, name: str) -> None:
    if pred.shape != true.shape:
        raise ShapeMismatch(f"{name}: prediction {pred.shape} vs target {true.shape}", op=name)


def history_loss(corrected: Operand, true: Operand) -> Node:
    """Mean squared deviation of the corrected history from the true history."""
    corrected, true = ad.lift(corrected), ad.lift(true)
    _check_shapes(corrected, true, "history_loss")
    diff = corrected - true
    return ad.mean(diff * diff)


def weighted_mse(
    pred: Operand,
    true: Operand,
    table: Optional[WeightTable] = None,
    weights: Optional[np.ndarray] = None,
) -> Node:
    """(1/N) sum w_i (pred_i - true_i)^2.

    Weights come from `weights` when given, else from `table` by the true value's
    bin, else all ones (plain MSE).
    """
    pred, true = ad.lift(pred), ad.lift(true)
    _check_shapes(pred, true, "weighted_mse")
    if weights is None:
        weights = table.lookup(true.value) if table is not None else np.ones(true.shape)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != true.shape:
        raise ShapeMismatch(f"weighted_mse: weights {weights.shape} vs target {true.shape}", op="weighted_mse")
    diff = pred - true
    return ad.mean(diff * diff * weights)


def total_objective(
    l_h: Operand, l_w: Operand, lambda_h: float = 5.0, lambda_w: float = 10.0
) -> Node:
    for name, value in (("history", l_h), ("weighted", l_w)):
        raw = value.value if isinstance(value, Node) else np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(raw)):
            raise NonFiniteInput(f"{name} loss is not finite", component=name)
    return ad.lift(l_h) * lambda_h + ad.lift(l_w) * lambda_w
