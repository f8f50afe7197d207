"""Training data ingestion: graymap directories to normalized patches."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .errors import DatasetError, FileFormatError
from .pgm import read_pgm
from .tensor import Tensor


def list_images(directory) -> list:
    """Sorted graymap paths in a directory; rejects missing or empty dirs."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"dataset directory {directory} does not exist")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise DatasetError(f"dataset directory {directory} contains no .pgm images")
    return files


def load_images(directory) -> list:
    """Read every graymap in a directory as (name, tensor) pairs.

    Unreadable files are skipped with a warning.
    """
    pairs = []
    skipped = 0
    for path in list_images(directory):
        try:
            pairs.append((path.name, read_pgm(path)))
        except (FileFormatError, OSError) as exc:
            skipped += 1
            warnings.warn(f"skipping unreadable image {path}: {exc}")
    if not pairs:
        raise DatasetError(f"no readable images in {directory} ({skipped} files skipped)")
    return pairs


def extract_patches(images, patch_size: int, seed: int,
                    patches_per_image: int = 4) -> list:
    """Random square patches from already-loaded 1 x H x W tensors.

    Images smaller than the patch size are reflect-padded first.  Order is
    deterministic for a fixed seed.
    """
    if patches_per_image < 1:
        raise ValueError(f"patches_per_image must be at least 1, got {patches_per_image}")
    rng = np.random.default_rng(seed)
    patches: list[Tensor] = []
    for image in images:
        data = image.data[0]
        pad_h = max(patch_size - data.shape[0], 0)
        pad_w = max(patch_size - data.shape[1], 0)
        if pad_h or pad_w:
            data = np.pad(data, ((0, pad_h), (0, pad_w)), mode="reflect")
        h, w = data.shape
        for _ in range(patches_per_image):
            top = int(rng.integers(0, h - patch_size + 1))
            left = int(rng.integers(0, w - patch_size + 1))
            patch = data[top:top + patch_size, left:left + patch_size]
            patches.append(Tensor(patch[None, :, :].copy()))
    return patches


def load_dataset(directory, patch_size: int, block_size: int, seed: int,
                 patches_per_image: int = 4) -> list:
    """Extract random patches from every graymap in a directory.

    Files that fail to parse are skipped with a warning; an empty or
    unreadable directory is rejected.
    """
    if patch_size % block_size:
        raise ValueError(f"patch size {patch_size} is not a multiple of block size {block_size}")
    images = [img for _, img in load_images(directory)]
    return extract_patches(images, patch_size, seed, patches_per_image)
