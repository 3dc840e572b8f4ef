from __future__ import annotations

import math

import numpy as np

from .. import _kernels


class Adam:
    """Adam with bias correction; updates parameter arrays in place.

    The corrections are folded into the step size and epsilon,
    ``lr * sqrt(c2) / c1`` and ``eps * sqrt(c2)``, which is algebraically the
    textbook update and lets one fused pass do the work.
    """

    def __init__(self, params: list[np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        s2 = math.sqrt(1.0 - b2 ** self.t)
        lr_t, eps_t = self.lr * s2 / c1, self.eps * s2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if not p.flags.c_contiguous:
                raise ValueError("Adam needs contiguous parameter arrays")
            g = np.ascontiguousarray(g, dtype=p.dtype)
            if p.dtype == np.float32:
                _kernels.adam_update(p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1),
                                     b1, b2, lr_t, eps_t)
            else:
                _kernels._fallback.adam_update(p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1),
                                               b1, b2, lr_t, eps_t)
