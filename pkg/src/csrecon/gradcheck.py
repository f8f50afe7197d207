"""Central finite-difference verification of every differentiable op.

Each check builds a scalar loss from an operation applied to seeded random
inputs, runs one backward pass, then perturbs randomly probed coordinates
by +-h and compares the difference quotient against the recorded gradient.
The end-to-end check does the same through a tiny unrolled model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .model import NetConfig, UnrolledModel, reconstruct
from .sampling import measure
from .tensor import Tensor


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28} max rel err {self.max_rel_err:.3e}  (tol {self.tol:.0e})"


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-6)


def check_gradient(name, make_loss, leaves, rng, n_probes=100, h=1e-5, tol=1e-4) -> CheckResult:
    """Compare backward() against central differences on random coordinates.

    ``make_loss`` must rebuild the full forward pass from the current leaf
    data every time it is called.
    """
    for p in leaves:
        p.grad = None
    loss = make_loss()
    loss.backward()
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in leaves]

    sizes = [p.data.size for p in leaves]
    total = int(np.sum(sizes))
    offsets = np.cumsum([0] + sizes)
    chosen = rng.choice(total, size=min(n_probes, total), replace=False)

    max_err = 0.0
    for flat in chosen:
        li = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = int(flat - offsets[li])
        p = leaves[li]
        orig = p.data.flat[idx]
        p.data.flat[idx] = orig + h
        f_plus = make_loss().item()
        p.data.flat[idx] = orig - h
        f_minus = make_loss().item()
        p.data.flat[idx] = orig
        fd = (f_plus - f_minus) / (2.0 * h)
        max_err = max(max_err, _rel_err(float(grads[li].flat[idx]), fd))
    return CheckResult(name, max_err, tol, max_err <= tol)


def _rand(rng, shape, away_from_zero=False) -> Tensor:
    data = rng.standard_normal(shape)
    if away_from_zero:
        # keep finite differences clear of the relu kink
        data = np.sign(data) * (np.abs(data) + 0.05)
    return Tensor(data, requires_grad=True)


def _weighted_sum(out: Tensor, w: np.ndarray) -> Tensor:
    return (out * Tensor(w)).sum()


def run_op_checks(seed: int = 0, n_probes: int = 100) -> list[CheckResult]:
    """Gradient checks for every differentiable operation."""
    rng = np.random.default_rng(seed)
    results = []

    def check(name, make_loss, leaves, tol=1e-4):
        results.append(check_gradient(name, make_loss, leaves, rng, n_probes=n_probes, tol=tol))

    a = _rand(rng, (4, 6, 6))
    b = _rand(rng, (4, 6, 6))
    w = rng.standard_normal((4, 6, 6))
    check("add", lambda: _weighted_sum(a + b, w), [a, b])
    check("sub", lambda: _weighted_sum(a - b, w), [a, b])
    check("mul", lambda: _weighted_sum(a * b, w), [a, b])

    s = _rand(rng, (1,))
    check("mul_broadcast", lambda: _weighted_sum(s * a, w), [s, a])
    check("broadcast_to", lambda: _weighted_sum(T.broadcast_to(s, (4, 6, 6)), w), [s])

    c = _rand(rng, (3, 7, 7))
    check("sum", lambda: c.sum() * 0.5, [c])
    wslice = rng.standard_normal((3, 2, 3))
    check("getitem", lambda: _weighted_sum(c[:, 2:4, 1:4], wslice), [c])
    wcat = rng.standard_normal((7, 6, 6))
    check("concat", lambda: _weighted_sum(T.concat([a, c[:, :6, :6]], axis=0), wcat), [a, c])

    r = _rand(rng, (4, 5, 5), away_from_zero=True)
    wr = rng.standard_normal((4, 5, 5))
    check("relu", lambda: _weighted_sum(T.relu(r), wr), [r])
    sp = _rand(rng, (11, 10))
    wsp = rng.standard_normal((11, 10))
    check("softplus", lambda: _weighted_sum(T.softplus(sp), wsp), [sp])

    x = _rand(rng, (12,))
    fw = _rand(rng, (9, 12))
    fb = _rand(rng, (9,))
    wf = rng.standard_normal(9)
    check("fully_connected", lambda: _weighted_sum(T.fully_connected(x, fw, fb), wf), [x, fw, fb])

    xc = _rand(rng, (2, 8, 8))
    kc = _rand(rng, (4, 2, 3, 3))
    bc = _rand(rng, (4,))
    wc = rng.standard_normal((4, 8, 8))
    check("conv2d_s1p1", lambda: _weighted_sum(T.conv2d(xc, kc, bc, stride=1, padding=1), wc), [xc, kc, bc])
    ws = rng.standard_normal((4, 3, 3))
    check("conv2d_s2p0", lambda: _weighted_sum(T.conv2d(xc, kc, bc, stride=2, padding=0), ws), [xc, kc, bc])

    x1 = _rand(rng, (6, 5, 5))
    k1 = _rand(rng, (3, 6, 1, 1))
    w1 = rng.standard_normal((3, 5, 5))
    check("conv1x1", lambda: _weighted_sum(T.conv1x1(x1, k1), w1), [x1, k1])

    xs = _rand(rng, (8, 4, 4))
    wp = rng.standard_normal((2, 8, 8))
    check("pixel_shuffle", lambda: _weighted_sum(T.pixel_shuffle(xs, 2), wp), [xs])
    wq = rng.standard_normal((8, 4, 4))
    xq = _rand(rng, (2, 8, 8))
    check("pixel_unshuffle", lambda: _weighted_sum(T.pixel_unshuffle(xq, 2), wq), [xq])

    return results


def run_end_to_end(seed: int = 0, n_probes: int = 60, tol: float = 1e-3) -> CheckResult:
    """Gradient check of the full reconstruction loss on a tiny model."""
    rng = np.random.default_rng(seed)
    config = NetConfig(stages=2, channels=4, ratios=(0.25,), block_size=8,
                       hidden=8, seed=seed)
    model = UnrolledModel.initialize(config)
    op = model.operators[0]
    image = Tensor(rng.random((1, 16, 16)))
    y = measure(op, image).detach()

    def make_loss():
        xk, _ = reconstruct(model, y, op, 0.25, record_trace=False)
        diff = xk - image
        return (diff * diff).sum()

    return check_gradient("end_to_end_tiny_model", make_loss, model.parameters(),
                          rng, n_probes=n_probes, tol=tol)


def run_all(seed: int = 0) -> list[CheckResult]:
    results = run_op_checks(seed)
    results.append(run_end_to_end(seed))
    return results
