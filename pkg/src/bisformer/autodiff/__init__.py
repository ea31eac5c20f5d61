from bisformer.autodiff.gradcheck import grad_check
from bisformer.autodiff.tensor import (
    Node,
    add,
    as_array,
    backward,
    broadcast_to,
    concat,
    constant,
    div,
    elu,
    exp,
    getitem,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    parameter,
    power,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    sub,
    sum_,
    swapaxes,
    tanh,
    transpose,
)

PRIMITIVES = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "matmul": matmul,
    "exp": exp,
    "log": log,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "elu": elu,
    "softmax": softmax,
    "sum": sum_,
    "mean": mean,
    "concat": concat,
    "stack": stack,
    "slice": getitem,
    "reshape": reshape,
    "broadcast": broadcast_to,
    "transpose": transpose,
}


def apply_primitive(op: str, *inputs, **kwargs) -> Node:
    """Dispatch a primitive by name; see PRIMITIVES for the supported set."""
    try:
        fn = PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"unknown primitive '{op}'")
    return fn(*inputs, **kwargs)


__all__ = [
    "Node",
    "PRIMITIVES",
    "apply_primitive",
    "as_array",
    "backward",
    "constant",
    "grad_check",
    "no_grad",
    "parameter",
] + sorted({fn.__name__ for fn in PRIMITIVES.values()} | {"neg", "power", "swapaxes"})
