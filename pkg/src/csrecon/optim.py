"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Standard Adam over a fixed list of parameter tensors.

    Moment buffers are exposed (``m``, ``v``, ``t``) so a checkpoint can
    capture and restore the full optimizer state.
    """

    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params: list[Tensor] = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        """One update from the gradients currently stored on the parameters."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                raise ValueError("Adam.step() called with a parameter missing its gradient")
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.data.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def load_state(self, m, v, t: int) -> None:
        """Restore moment buffers and step count, e.g. when resuming."""
        if len(m) != len(self.params) or len(v) != len(self.params):
            raise ValueError("optimizer state does not match parameter count")
        for p, mi, vi in zip(self.params, m, v):
            if mi.shape != p.data.shape or vi.shape != p.data.shape:
                raise ValueError("optimizer state shape mismatch")
        self.m = [np.array(mi, dtype=np.float64) for mi in m]
        self.v = [np.array(vi, dtype=np.float64) for vi in v]
        self.t = int(t)
