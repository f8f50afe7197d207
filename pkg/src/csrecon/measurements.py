"""Measurement container: everything needed to reconstruct later.

Format: magic "ISTAMEAS", the standard length-prefixed key=value header
(B, gamma, M, seed, h, w, plus the pre-padding image size and the
orthonormal fixture flag), then the M x h x w float64 payload.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ioutil import ContainerReader, write_container
from .sampling import SamplingOperator, make_operator
from .tensor import Tensor

MAGIC = b"ISTAMEAS"


@dataclass
class MeasurementFile:
    y: Tensor
    block_size: int
    ratio: float
    seed: int
    orthonormal: bool
    orig_h: int
    orig_w: int

    def operator(self) -> SamplingOperator:
        """Regenerate the sensing operator this file was sampled with."""
        return make_operator(self.block_size, self.ratio, self.seed,
                             orthonormalize=self.orthonormal)


def write_measurements(path, y: Tensor, op: SamplingOperator,
                       orig_h: int, orig_w: int) -> None:
    if y.data.ndim != 3 or y.data.shape[0] != op.m:
        raise ValueError(f"measurements must be M x h x w with M = {op.m}, got shape {y.shape}")
    _, h, w = y.data.shape
    fields = {
        "B": op.block_size,
        "gamma": repr(op.ratio),
        "M": op.m,
        "seed": op.seed,
        "h": h,
        "w": w,
        "orig_h": orig_h,
        "orig_w": orig_w,
        "ortho": int(op.orthonormal),
    }
    write_container(path, MAGIC, fields, [y.data])


def read_measurements(path) -> MeasurementFile:
    reader = ContainerReader(path, MAGIC)
    b = reader.int_field("B")
    gamma = reader.float_field("gamma")
    m = reader.int_field("M")
    seed = reader.int_field("seed")
    h = reader.int_field("h")
    w = reader.int_field("w")
    orig_h = reader.int_field("orig_h")
    orig_w = reader.int_field("orig_w")
    ortho = bool(reader.int_field("ortho"))
    y = reader.take_array((m, h, w))
    reader.finish()
    return MeasurementFile(y=Tensor(y), block_size=b, ratio=gamma, seed=seed,
                           orthonormal=ortho, orig_h=orig_h, orig_w=orig_w)
