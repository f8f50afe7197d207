"""Reconstruction quality metrics and block-alignment padding."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .tensor import Tensor


def psnr(x: Tensor, ref: Tensor) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0.

    A perfect match returns math.inf rather than overflowing the log.
    """
    if x.data.shape != ref.data.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if ref.data.min() < -1e-12 or ref.data.max() > 1.0 + 1e-12:
        raise ValueError("reference image must lie in [0, 1]")
    diff = x.data - ref.data
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def pad_to_blocks(x: Tensor, block_size: int):
    """Reflect-pad right and bottom to the next block multiple.

    Returns (padded image, (original H, original W)).
    """
    if block_size < 2:
        raise ValueError(f"block_size must be at least 2, got {block_size}")
    if x.data.ndim != 3 or x.data.shape[0] != 1:
        raise ValueError(f"expected a 1 x H x W image, got shape {x.shape}")
    _, h, w = x.data.shape
    pad_h = (-h) % block_size
    pad_w = (-w) % block_size
    if pad_h == 0 and pad_w == 0:
        return x, (h, w)
    padded = np.pad(x.data, ((0, 0), (0, pad_h), (0, pad_w)), mode="reflect")
    return Tensor(padded), (h, w)


def crop_back(x: Tensor, h: int, w: int) -> Tensor:
    """Undo :func:`pad_to_blocks`."""
    if x.data.ndim != 3:
        raise ValueError(f"expected a C x H x W image, got shape {x.shape}")
    if h > x.data.shape[1] or w > x.data.shape[2]:
        raise ValueError(f"crop size {h} x {w} exceeds image size {x.shape}")
    return Tensor(x.data[:, :h, :w])


class ArtifactScore(NamedTuple):
    """Blocking-artifact proxy: clamped score plus the raw signed value."""

    score: float
    raw: float


def block_artifact_score(x: Tensor, block_size: int) -> ArtifactScore:
    """Mean |difference| across block-boundary neighbor pairs minus the
    same statistic over interior neighbor pairs.

    Zero for constant images; positive when block seams carry more energy
    than the image interior.
    """
    if x.data.ndim != 3 or x.data.shape[0] != 1:
        raise ValueError(f"expected a 1 x H x W image, got shape {x.shape}")
    _, h, w = x.data.shape
    if h % block_size or w % block_size:
        raise ValueError(f"image size {h} x {w} is not a multiple of block size {block_size}")
    a = x.data[0]
    vdiff = np.abs(a[1:, :] - a[:-1, :])
    hdiff = np.abs(a[:, 1:] - a[:, :-1])
    vmask = (np.arange(1, h) % block_size) == 0
    hmask = (np.arange(1, w) % block_size) == 0

    boundary = np.concatenate([vdiff[vmask, :].ravel(), hdiff[:, hmask].ravel()])
    interior = np.concatenate([vdiff[~vmask, :].ravel(), hdiff[:, ~hmask].ravel()])
    if boundary.size == 0 or interior.size == 0:
        return ArtifactScore(0.0, 0.0)
    raw = float(boundary.mean() - interior.mean())
    return ArtifactScore(max(raw, 0.0), raw)
