"""Checkpoint persistence with bit-exact round trips.

Format: magic "ISTAPP01", the standard length-prefixed key=value header
(architecture, flags, operator metadata, epoch, optimizer hyperparameters),
then float64 arrays in a fixed order: condition-network layers, stages 1..K
(extraction, both residual blocks, reconstruction, fallback scalars), the
sensing matrices per ratio ascending, then the Adam first and second moment
buffers for every active parameter in optimizer order.  The magic carries
the format version, so an incompatible file is rejected before any
parameter is read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError
from .ioutil import ContainerReader, write_container
from .model import CmParams, NetConfig, StageParams, UnrolledModel
from .optim import Adam
from .sampling import SamplingOperator, measurement_count
from .tensor import Tensor

MAGIC = b"ISTAPP01"
MAGIC_FAMILY = b"ISTAPP"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: UnrolledModel
    optimizer: Adam
    epoch: int
    running_loss: float


def _config_fields(config: NetConfig) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "stages": config.stages,
        "channels": config.channels,
        "hidden": config.hidden,
        "block_size": config.block_size,
        "net_seed": config.seed,
        "ratios": ",".join(repr(r) for r in config.ratios),
        "dus_rho": int(config.dus_rho),
        "dus_sigma": int(config.dus_sigma),
        "cbs": int(config.cbs),
    }


def save_checkpoint(path, model: UnrolledModel, optimizer: Adam,
                    epoch: int, running_loss: float) -> None:
    """Write model, operators and optimizer state; atomic on failure."""
    params = model.parameters()
    if len(optimizer.params) != len(params):
        raise ValueError("optimizer does not cover the model's active parameter set")
    ops = sorted(model.operators, key=lambda op: op.ratio)
    fields = _config_fields(model.config)
    fields.update({
        "operator_seeds": ",".join(str(op.seed) for op in ops),
        "operator_m": ",".join(str(op.m) for op in ops),
        "operator_ortho": ",".join(str(int(op.orthonormal)) for op in ops),
        "epoch": int(epoch),
        "running_loss": repr(float(running_loss)),
        "adam_t": optimizer.t,
        "adam_lr": repr(optimizer.lr),
        "adam_beta1": repr(optimizer.beta1),
        "adam_beta2": repr(optimizer.beta2),
        "adam_eps": repr(optimizer.eps),
        "adam_params": len(params),
    })
    arrays = [t.data for t in model.all_tensors()]
    arrays.extend(op.phi for op in ops)
    arrays.extend(optimizer.m)
    arrays.extend(optimizer.v)
    write_container(path, MAGIC, fields, arrays)


def _zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def _model_shapes(config: NetConfig):
    """Expected array shapes in save order (condition net, then stages)."""
    h, k, c = config.hidden, config.stages, config.channels
    shapes = [(h, 1), (h,), (h, h), (h,), (2 * k, h), (2 * k,)]
    stage = [
        (c, 2, 3, 3), (c,),
        (c, c, 3, 3), (c,), (c, c, 3, 3), (c,),
        (c, c, 3, 3), (c,), (c, c, 3, 3), (c,),
        (1, c, 3, 3), (1,),
        (1,), (1,),
    ]
    for _ in range(k):
        shapes.extend(stage)
    return shapes


def load_checkpoint(path, expect: NetConfig | None = None) -> Checkpoint:
    """Rebuild the model, operators and optimizer saved at ``path``.

    ``expect`` optionally pins the architecture the caller was built for;
    any structural mismatch is rejected before parameters are used.
    """
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:6] == MAGIC_FAMILY and head != MAGIC:
        raise FileFormatError(
            f"{path}: unsupported checkpoint version {head[6:]!r} at byte 6, "
            f"this build reads version {MAGIC[6:]!r}"
        )
    reader = ContainerReader(path, MAGIC)
    if reader.int_field("format_version") != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported format_version in header")

    ratios = tuple(float(r) for r in reader.fields["ratios"].split(","))
    config = NetConfig(
        stages=reader.int_field("stages"),
        channels=reader.int_field("channels"),
        ratios=ratios,
        block_size=reader.int_field("block_size"),
        hidden=reader.int_field("hidden"),
        dus_rho=bool(reader.int_field("dus_rho")),
        dus_sigma=bool(reader.int_field("dus_sigma")),
        cbs=bool(reader.int_field("cbs")),
        seed=reader.int_field("net_seed"),
    )
    if expect is not None and expect != config:
        raise ValueError(
            f"checkpoint architecture {config} does not match the expected {expect}"
        )

    tensors = [Tensor(reader.take_array(s), requires_grad=True) for s in _model_shapes(config)]
    cm = CmParams(*tensors[:6])
    stages = [StageParams(*tensors[6 + i * 14:6 + (i + 1) * 14]) for i in range(config.stages)]

    seeds = [int(s) for s in reader.fields["operator_seeds"].split(",")]
    ms = [int(s) for s in reader.fields["operator_m"].split(",")]
    orthos = [bool(int(s)) for s in reader.fields["operator_ortho"].split(",")]
    if not len(seeds) == len(ms) == len(orthos) == len(config.ratios):
        raise FileFormatError(f"{path}: operator metadata does not match the ratio list")
    n = config.block_size ** 2
    operators = []
    for ratio, seed, m, ortho in zip(config.ratios, seeds, ms, orthos):
        if not ortho and m != measurement_count(config.block_size, ratio):
            raise FileFormatError(f"{path}: stored M = {m} inconsistent with ratio {ratio}")
        phi = reader.take_array((m, n))
        operators.append(SamplingOperator(block_size=config.block_size, ratio=ratio,
                                          seed=seed, phi=phi, orthonormal=ortho))

    model = UnrolledModel(config=config, cm=cm, stages=stages, operators=operators)
    params = model.parameters()
    if reader.int_field("adam_params") != len(params):
        raise FileFormatError(f"{path}: stored optimizer covers a different parameter set")
    m_buf = [reader.take_array(p.data.shape) for p in params]
    v_buf = [reader.take_array(p.data.shape) for p in params]
    reader.finish()

    optimizer = Adam(
        params,
        lr=reader.float_field("adam_lr"),
        beta1=reader.float_field("adam_beta1"),
        beta2=reader.float_field("adam_beta2"),
        eps=reader.float_field("adam_eps"),
    )
    optimizer.load_state(m_buf, v_buf, reader.int_field("adam_t"))
    return Checkpoint(
        model=model,
        optimizer=optimizer,
        epoch=reader.int_field("epoch"),
        running_loss=reader.float_field("running_loss"),
    )
