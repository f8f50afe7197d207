"""Classical ISTA baseline with a pixel-domain l1 prior.

Minimizes 0.5 ||A x - y||^2 + reg ||x||_1 by alternating a gradient step on
the data term with the exact l1 proximal map (soft thresholding).  Serves
as the non-learned reference reconstructor and as a correctness anchor for
the unrolled network's gradient module, which evaluates the same update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import SamplingOperator, gram_spectral_norm, init_transpose, measure
from .tensor import Tensor


class StepSizeError(RuntimeError):
    """Objective blew up, which points at a too-large step size."""


@dataclass
class IstaConfig:
    step: float
    reg: float
    max_iters: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.reg < 0.0:
            raise ValueError(f"reg must be non-negative, got {self.reg}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.tol < 0.0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")


def default_step(op: SamplingOperator) -> float:
    """0.9 / L with L the power-iteration estimate of lambda_max(phi^T phi)."""
    return 0.9 / gram_spectral_norm(op)


def objective(x: Tensor, y: Tensor, op: SamplingOperator, reg: float) -> float:
    """0.5 ||A x - y||_2^2 + reg ||x||_1."""
    r = measure(op, x).data - y.data
    return 0.5 * float(np.sum(r * r)) + reg * float(np.sum(np.abs(x.data)))


def gradient_step(x: Tensor, y: Tensor, op: SamplingOperator, step) -> Tensor:
    """x - step * A^T (A x - y).

    ``step`` may be a float or a scalar Tensor; with a Tensor the result is
    differentiable in both x and the step, which is how the unrolled
    network's per-stage update uses it.
    """
    residual = measure(op, x) - y
    return x - step * init_transpose(op, residual)


def soft_threshold(r: Tensor, tau: float) -> Tensor:
    """Elementwise sign(r) * max(|r| - tau, 0), the exact l1 prox."""
    if tau < 0.0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    d = r.data
    return Tensor(np.sign(d) * np.maximum(np.abs(d) - tau, 0.0))


def run_ista(y: Tensor, op: SamplingOperator, cfg: IstaConfig):
    """Iterate from x0 = A^T y; returns (image, per-iteration objectives).

    Stops early when the relative objective change drops below cfg.tol;
    raises StepSizeError if the objective exceeds 1e6 times its initial
    value.
    """
    x = init_transpose(op, y)
    initial = objective(x, y, op, cfg.reg)
    blowup = 1e6 * max(initial, 1e-12)
    prev = initial
    trace: list[float] = []
    for _ in range(cfg.max_iters):
        x = soft_threshold(gradient_step(x, y, op, cfg.step), cfg.reg * cfg.step)
        obj = objective(x, y, op, cfg.reg)
        trace.append(obj)
        if obj > blowup:
            raise StepSizeError(
                f"objective grew from {initial:.6g} to {obj:.6g}; reduce the step size"
            )
        if abs(prev - obj) < cfg.tol * max(prev, 1e-12):
            break
        prev = obj
    return x, trace
