from typing import Dict, Mapping, Optional

import numpy as np

from bisformer.autodiff.tensor import Node


class Adam:
    """Adam with bias-corrected moments, updating Node values in place."""

    def __init__(
        self,
        params: Mapping[str, Node],
        lr: float = 0.03,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: Dict[str, np.ndarray] = {name: np.zeros_like(p.value) for name, p in self.params.items()}
        self._v: Dict[str, np.ndarray] = {name: np.zeros_like(p.value) for name, p in self.params.items()}

    def step(self, grads: Optional[Mapping[str, np.ndarray]] = None) -> None:
        """Apply one update from `grads`, or from each parameter's `.grad` when omitted."""
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad if grads is None else grads[name]
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / correction1
            v_hat = v / correction2
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
