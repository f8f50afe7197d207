"""Multi-ratio training loop over a fixed operator set.

The loss follows the averaged double sum over training images and sampling
ratios: every batch measures each image with every configured operator,
reconstructs, and accumulates the squared l2 error divided by
(batch size x ratio count).  One parameter set is trained for all ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .data import load_dataset
from .errors import NumericalDivergenceError
from .model import UnrolledModel, _stage_scalars, reconstruct
from .optim import Adam
from .sampling import measure
from .tensor import Tensor

DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass
class TrainConfig:
    dataset_dir: str
    checkpoint_dir: str
    epochs: int
    batch_size: int = 64
    lr: float = 1e-4
    ratios: tuple = DEFAULT_RATIOS
    patch_size: int = 96
    seed: int = 0
    patches_per_image: int = 4

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.lr < 0.0:
            raise ValueError(f"learning rate must be non-negative, got {self.lr}")
        self.ratios = tuple(float(r) for r in self.ratios)


def batch_loss(model: UnrolledModel, batch, ops) -> Tensor:
    """Mean over (image, ratio) pairs of the squared reconstruction error."""
    if not batch:
        raise ValueError("batch must be non-empty")
    if not ops:
        raise ValueError("operator set must be non-empty")
    total = None
    for image in batch:
        for op in ops:
            y = measure(op, image)
            xk, _ = reconstruct(model, y, op, op.ratio, record_trace=False)
            diff = xk - image
            err = (diff * diff).sum()
            total = err if total is None else total + err
    return total * (1.0 / (len(batch) * len(ops)))


def _first_nonfinite_stage(model: UnrolledModel, batch, ops) -> str:
    """Locate the earliest non-finite intermediate for the abort message."""
    for op in ops:
        rhos, sigmas = _stage_scalars(model, op.ratio)
        for t in rhos + sigmas:
            if not np.all(np.isfinite(t.data)):
                return f"condition outputs for ratio {op.ratio}"
        for i, image in enumerate(batch):
            y = measure(op, image)
            _, trace = reconstruct(model, y, op, op.ratio, record_trace=True)
            for k, xk in enumerate(trace):
                if not np.all(np.isfinite(xk.data)):
                    where = "initialization" if k == 0 else f"stage {k}"
                    return f"{where} output for image {i}, ratio {op.ratio}"
    return "loss accumulation"


@dataclass
class TrainResult:
    model: UnrolledModel
    losses: list = field(default_factory=list)
    final_epoch: int = 0


def train(model: UnrolledModel, cfg: TrainConfig, dataset=None,
          optimizer: Adam | None = None, start_epoch: int = 0) -> TrainResult:
    """Train in place; returns the model and the per-epoch loss trace.

    Patches are reshuffled every epoch with a seed derived from
    (cfg.seed, epoch), so a resumed run visits the same order as an
    uninterrupted one.  A checkpoint is written after every epoch.
    """
    if cfg.patch_size % model.config.block_size:
        raise ValueError(
            f"patch size {cfg.patch_size} is not a multiple of "
            f"block size {model.config.block_size}"
        )
    if tuple(cfg.ratios) != tuple(model.config.ratios):
        raise ValueError(
            f"training ratios {cfg.ratios} do not match the model's {model.config.ratios}"
        )
    if dataset is None:
        dataset = load_dataset(cfg.dataset_dir, cfg.patch_size, model.config.block_size,
                               cfg.seed, cfg.patches_per_image)
    ops = model.operators
    if optimizer is None:
        optimizer = Adam(model.parameters(), lr=cfg.lr)
    ckpt_dir = Path(cfg.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)

    losses: list[float] = []
    n = len(dataset)
    for epoch in range(start_epoch, start_epoch + cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        weighted = 0.0
        for lo in range(0, n, cfg.batch_size):
            batch = [dataset[i] for i in order[lo:lo + cfg.batch_size]]
            optimizer.zero_grad()
            loss = batch_loss(model, batch, ops)
            value = loss.item()
            if not math.isfinite(value):
                detail = _first_nonfinite_stage(model, batch, ops)
                raise NumericalDivergenceError(
                    f"non-finite loss at epoch {epoch}: first non-finite value in {detail}"
                )
            loss.backward()
            optimizer.step()
            weighted += value * len(batch)
        epoch_loss = weighted / n
        losses.append(epoch_loss)
        save_checkpoint(ckpt_dir / f"epoch_{epoch + 1:04d}.ckpt", model, optimizer,
                        epoch=epoch + 1, running_loss=epoch_loss)
    return TrainResult(model=model, losses=losses, final_epoch=start_epoch + cfg.epochs)


def resume(checkpoint: Checkpoint, cfg: TrainConfig, dataset=None) -> TrainResult:
    """Continue training from a loaded checkpoint."""
    return train(checkpoint.model, cfg, dataset=dataset,
                 optimizer=checkpoint.optimizer, start_epoch=checkpoint.epoch)
