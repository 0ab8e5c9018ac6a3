"""Adam optimizer with penalties restricted to scaling coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, TrainingError
from .tensor import Parameter


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l1: float = 0.0
    l2: float = 0.0
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


class Adam:
    """Bias-corrected Adam.

    ``l1`` and ``l2`` act only on parameters with ``scaling=True``: L1 adds
    ``l1 * sign(p)`` to the gradient, L2 adds ``2 * l2 * p``.  Both default
    to zero; the training loop puts penalties into the loss instead.
    """

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-3,
                 betas: tuple = (0.9, 0.999), eps: float = 1e-8,
                 l1: float = 0.0, l2: float = 0.0):
        self.params = list(params)
        self.state = OptimizerState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
                                    l1=l1, l2=l2,
                                    m=[np.zeros_like(p.data) for p in self.params],
                                    v=[np.zeros_like(p.data) for p in self.params])

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, grads: Sequence[np.ndarray] | None = None):
        st = self.state
        if grads is None:
            grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        for p, g in zip(self.params, grads):
            if g.shape != p.data.shape:
                raise DimensionError(f"gradient shape {g.shape} != parameter {p.name!r} {p.data.shape}")
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {p.name!r}")
        st.step += 1
        b1, b2 = st.beta1, st.beta2
        c1 = 1.0 - b1 ** st.step
        c2 = 1.0 - b2 ** st.step
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if p.scaling and (st.l1 or st.l2):
                g = g + st.l1 * np.sign(p.data) + 2.0 * st.l2 * p.data
            m = st.m[i]
            v = st.v[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
