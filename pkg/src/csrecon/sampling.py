"""Fixed Gaussian block-sampling operators and their adjoints.

A sampling operator draws an M x N Gaussian matrix (N = B^2 pixels per
block, M = round(ratio * N) measurements) and realizes it as convolution
kernels: measuring an image is a stride-B convolution over the whole image,
and the adjoint is a 1x1 convolution followed by a pixel shuffle.  Both act
on whole images, so a single operator serves any H x W that is a multiple
of the block size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, conv1x1, conv2d, pixel_shuffle


@dataclass
class SamplingOperator:
    """One fixed sensing matrix and its convolutional realizations.

    Immutable after construction; safe to share across threads.
    """

    block_size: int
    ratio: float
    seed: int
    phi: np.ndarray
    orthonormal: bool = False
    w_phi: Tensor = field(init=False, repr=False)
    w_phi_t: Tensor = field(init=False, repr=False)

    def __post_init__(self):
        b = self.block_size
        m, n = self.phi.shape
        if n != b * b:
            raise ValueError(f"phi has {n} columns, expected block_size^2 = {b * b}")
        # Row r of phi becomes measurement filter r; column c becomes
        # adjoint output channel c.  Both reshapes are row-major and
        # round-trip bit-exactly.
        self.w_phi = Tensor(self.phi.reshape(m, 1, b, b))
        self.w_phi_t = Tensor(np.ascontiguousarray(self.phi.T).reshape(n, m, 1, 1))

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]


def measurement_count(block_size: int, ratio: float) -> int:
    """M = round(ratio * B^2), half rounded up, clamped to [1, B^2]."""
    n = block_size * block_size
    m = int(math.floor(ratio * n + 0.5))
    return max(1, min(m, n))


def make_operator(block_size: int, ratio: float, seed: int,
                  orthonormalize: bool = False) -> SamplingOperator:
    """Draw a fixed Gaussian operator, deterministic in (B, ratio, seed).

    Entries are i.i.d. N(0, 1/N) so measurement magnitudes do not scale
    with the block size.  ``orthonormalize`` Gram-Schmidts the rows and is
    meant for test fixtures where phi phi^T = I is needed exactly.
    """
    if block_size < 2:
        raise ValueError(f"block_size must be at least 2, got {block_size}")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    n = block_size * block_size
    m = measurement_count(block_size, ratio)
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((m, n)) / math.sqrt(n)
    if orthonormalize:
        q, r = np.linalg.qr(phi.T)
        # fix signs so the result matches classical Gram-Schmidt
        q = q * np.sign(np.diag(r))
        phi = np.ascontiguousarray(q.T)
    return SamplingOperator(block_size=block_size, ratio=float(ratio), seed=int(seed),
                            phi=phi, orthonormal=orthonormalize)


def make_ratio_set(block_size: int, ratios, master_seed: int,
                   orthonormalize: bool = False) -> list[SamplingOperator]:
    """One independent operator per ratio, seeded master_seed + index."""
    ratios = list(ratios)
    if not ratios:
        raise ValueError("ratio set must be non-empty")
    return [
        make_operator(block_size, r, master_seed + i, orthonormalize=orthonormalize)
        for i, r in enumerate(ratios)
    ]


def measure(op: SamplingOperator, x: Tensor) -> Tensor:
    """Sample a whole 1 x H x W image: Y = W_phi * X with stride B.

    Channel r of the M x (H/B) x (W/B) output at block position (i, j) is
    row r of phi dotted with that block flattened row-major.
    """
    if x.data.ndim != 3 or x.data.shape[0] != 1:
        raise ValueError(f"measure expects a 1 x H x W image, got shape {x.shape}")
    b = op.block_size
    _, h, w = x.data.shape
    if h % b or w % b:
        raise ValueError(f"image size {h} x {w} is not a multiple of block size {b}; pad first")
    return conv2d(x, op.w_phi, bias=None, stride=b, padding=0)


def init_transpose(op: SamplingOperator, y: Tensor) -> Tensor:
    """Adjoint map measurements back to image size: PixelShuffle(W_phiT * Y)."""
    if y.data.ndim != 3:
        raise ValueError(f"init_transpose expects an M x h x w tensor, got shape {y.shape}")
    if y.data.shape[0] != op.m:
        raise ValueError(f"measurement channel count {y.data.shape[0]} does not match M = {op.m}")
    return pixel_shuffle(conv1x1(y, op.w_phi_t), op.block_size)


def gram_spectral_norm(op: SamplingOperator, iters: int = 50, seed: int = 0) -> float:
    """Largest eigenvalue of phi^T phi, estimated by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.n)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = op.phi.T @ (op.phi @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(v @ (op.phi.T @ (op.phi @ v)))
