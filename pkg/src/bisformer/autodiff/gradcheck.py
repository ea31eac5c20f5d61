from typing import Callable, List, Optional, Sequence

import numpy as np

from bisformer.autodiff.tensor import Node, backward, constant, no_grad, parameter


def grad_check(
    f: Callable[..., Node],
    inputs: Sequence[np.ndarray],
    eps: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Max relative error between backward gradients and central differences.

    `f` receives one Node per input and must return a scalar Node. With `max_coords`,
    a seeded subset of coordinates is checked.
    """
    if not 0 < eps <= 1e-2:
        raise ValueError("eps must lie in (0, 1e-2]")
    arrays: List[np.ndarray] = [np.array(x, dtype=np.float64) for x in inputs]

    leaves = [parameter(x) for x in arrays]
    out = f(*leaves)
    backward(out, params=leaves)
    analytic = [leaf.grad.copy() for leaf in leaves]

    coords = [(i, j) for i, x in enumerate(arrays) for j in range(x.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[k] for k in sorted(picked)]

    def evaluate(perturbed: List[np.ndarray]) -> float:
        with no_grad():
            return f(*[constant(x) for x in perturbed]).item()

    worst = 0.0
    for i, j in coords:
        plus = [x.copy() for x in arrays]
        minus = [x.copy() for x in arrays]
        plus[i].flat[j] += eps
        minus[i].flat[j] -= eps
        numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * eps)
        a = float(analytic[i].flat[j])
        denom = max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, abs(a - numeric) / denom)
    return worst
