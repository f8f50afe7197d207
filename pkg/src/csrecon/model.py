"""Unrolled reconstruction network with ratio-conditioned stage dynamics.

The network alternates, K times, a gradient step on the measurement
residual (step size rho_k) with a small convolutional refinement network
conditioned on a noise-level plane (sigma_k).  A three-layer fully
connected condition network maps the sampling ratio to all 2K per-stage
scalars, so one trained parameter set serves every ratio it was trained
on.  Ablation flags can replace the conditioned scalars with per-stage
learned fallbacks and switch whole-image reconstruction to independent
per-block reconstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ista import gradient_step
from .sampling import SamplingOperator, init_transpose, make_ratio_set
from .tensor import (
    Tensor,
    broadcast_to,
    concat,
    conv2d,
    fully_connected,
    relu,
    softplus,
)

DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class NetConfig:
    """Architecture and ablation switches.

    ``stages`` may be 0 only as a degenerate test configuration in which
    reconstruction returns the adjoint initialization unchanged.
    """

    stages: int = 20
    channels: int = 32
    ratios: tuple = DEFAULT_RATIOS
    block_size: int = 32
    hidden: int = 64
    dus_rho: bool = True
    dus_sigma: bool = True
    cbs: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.stages < 0:
            raise ValueError(f"stages must be non-negative, got {self.stages}")
        if self.channels < 1:
            raise ValueError(f"channels must be at least 1, got {self.channels}")
        if self.hidden < 1:
            raise ValueError(f"hidden width must be at least 1, got {self.hidden}")
        if self.block_size < 2:
            raise ValueError(f"block_size must be at least 2, got {self.block_size}")
        ratios = tuple(float(r) for r in self.ratios)
        if not ratios:
            raise ValueError("ratio list must be non-empty")
        for r in ratios:
            if not 0.0 < r <= 1.0:
                raise ValueError(f"ratio must be in (0, 1], got {r}")
        if any(b <= a for a, b in zip(ratios, ratios[1:])):
            raise ValueError("ratios must be strictly increasing")
        object.__setattr__(self, "ratios", ratios)


@dataclass
class CmParams:
    """Three affine layers 1 -> h -> h -> 2K with ReLU, ReLU, Softplus."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    w3: Tensor
    b3: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]


@dataclass
class StageParams:
    """Weights of one unrolled stage.

    ext lifts [image, noise plane] to the working channel count, two
    residual blocks (conv3x3 - ReLU - conv3x3 plus identity skip) refine,
    rec projects back to one channel.  rho_bar and sigma_bar are the
    learned per-stage scalars used when the dynamic flags are off.
    """

    ext_k: Tensor
    ext_b: Tensor
    rb1_k1: Tensor
    rb1_b1: Tensor
    rb1_k2: Tensor
    rb1_b2: Tensor
    rb2_k1: Tensor
    rb2_b1: Tensor
    rb2_k2: Tensor
    rb2_b2: Tensor
    rec_k: Tensor
    rec_b: Tensor
    rho_bar: Tensor
    sigma_bar: Tensor

    def tensors(self) -> list[Tensor]:
        return [
            self.ext_k, self.ext_b,
            self.rb1_k1, self.rb1_b1, self.rb1_k2, self.rb1_b2,
            self.rb2_k1, self.rb2_b1, self.rb2_k2, self.rb2_b2,
            self.rec_k, self.rec_b,
            self.rho_bar, self.sigma_bar,
        ]


@dataclass
class ConditionOutput:
    """Per-stage dynamic scalars, each a strictly positive (1,) tensor."""

    rhos: list
    sigmas: list


def _kaiming(rng, shape, fan_in) -> Tensor:
    data = rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)
    return Tensor(data, requires_grad=True)


def _zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def _make_cm(rng, hidden: int, stages: int) -> CmParams:
    return CmParams(
        w1=_kaiming(rng, (hidden, 1), 1),
        b1=_zeros(hidden),
        w2=_kaiming(rng, (hidden, hidden), hidden),
        b2=_zeros(hidden),
        w3=_kaiming(rng, (2 * stages, hidden), hidden),
        b3=_zeros(2 * stages),
    )


def _make_stage(rng, channels: int) -> StageParams:
    c = channels

    def conv(c_out, c_in):
        return _kaiming(rng, (c_out, c_in, 3, 3), c_in * 9)

    return StageParams(
        ext_k=conv(c, 2), ext_b=_zeros(c),
        rb1_k1=conv(c, c), rb1_b1=_zeros(c),
        rb1_k2=conv(c, c), rb1_b2=_zeros(c),
        rb2_k1=conv(c, c), rb2_b1=_zeros(c),
        rb2_k2=conv(c, c), rb2_b2=_zeros(c),
        rec_k=conv(1, c), rec_b=_zeros(1),
        rho_bar=Tensor([1.0], requires_grad=True),
        sigma_bar=Tensor([0.1], requires_grad=True),
    )


@dataclass
class UnrolledModel:
    """Parameter set plus the fixed sampling operators it was built for."""

    config: NetConfig
    cm: CmParams
    stages: list
    operators: list = field(default_factory=list)

    @classmethod
    def initialize(cls, config: NetConfig) -> "UnrolledModel":
        """Seeded Gaussian init (std sqrt(2 / fan_in)), biases zero."""
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
        cm = _make_cm(rng, config.hidden, config.stages)
        stages = [_make_stage(rng, config.channels) for _ in range(config.stages)]
        ops = make_ratio_set(config.block_size, config.ratios, master_seed=config.seed)
        return cls(config=config, cm=cm, stages=stages, operators=ops)

    def parameters(self) -> list:
        """The active learnable set: CM only when some dynamic flag is on,
        fallback scalars only when the matching flag is off."""
        params: list[Tensor] = []
        if self.config.dus_rho or self.config.dus_sigma:
            params.extend(self.cm.tensors())
        for st in self.stages:
            params.extend([
                st.ext_k, st.ext_b,
                st.rb1_k1, st.rb1_b1, st.rb1_k2, st.rb1_b2,
                st.rb2_k1, st.rb2_b1, st.rb2_k2, st.rb2_b2,
                st.rec_k, st.rec_b,
            ])
            if not self.config.dus_rho:
                params.append(st.rho_bar)
            if not self.config.dus_sigma:
                params.append(st.sigma_bar)
        return params

    def all_tensors(self) -> list:
        """Every stored tensor in checkpoint order, active or not."""
        out = self.cm.tensors()
        for st in self.stages:
            out.extend(st.tensors())
        return out

    def operator_for(self, gamma: float) -> SamplingOperator:
        for op in self.operators:
            if math.isclose(op.ratio, gamma, rel_tol=0.0, abs_tol=1e-9):
                return op
        raise KeyError(f"no operator for ratio {gamma}")

    def with_flags(self, **flags) -> NetConfig:
        return replace(self.config, **flags)


def condition_forward(cm: CmParams, gamma: float, stages: int) -> ConditionOutput:
    """Map the ratio to [rho_1..rho_K, sigma_1..sigma_K], all positive."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {gamma}")
    h = relu(fully_connected(Tensor([gamma]), cm.w1, cm.b1))
    h = relu(fully_connected(h, cm.w2, cm.b2))
    out = softplus(fully_connected(h, cm.w3, cm.b3))
    if out.data.shape[0] != 2 * stages:
        raise ValueError(
            f"condition output length {out.data.shape[0]} does not match 2K = {2 * stages}"
        )
    rhos = [out[k:k + 1] for k in range(stages)]
    sigmas = [out[stages + k:stages + k + 1] for k in range(stages)]
    return ConditionOutput(rhos=rhos, sigmas=sigmas)


def _residual_block(x: Tensor, k1, b1, k2, b2) -> Tensor:
    z = conv2d(x, k1, b1, stride=1, padding=1)
    z = relu(z)
    z = conv2d(z, k2, b2, stride=1, padding=1)
    return x + z


def proximal_step(stage: StageParams, r: Tensor, sigma) -> Tensor:
    """Refine r with the stage network conditioned on a sigma-filled plane.

    ``sigma`` is a (1,) tensor; the plane it fills has the same spatial
    size as r and enters by channel concatenation.
    """
    _, h, w = r.data.shape
    noise_plane = broadcast_to(sigma, (1, h, w))
    z = concat([r, noise_plane], axis=0)
    z = conv2d(z, stage.ext_k, stage.ext_b, stride=1, padding=1)
    z = _residual_block(z, stage.rb1_k1, stage.rb1_b1, stage.rb1_k2, stage.rb1_b2)
    z = _residual_block(z, stage.rb2_k1, stage.rb2_b1, stage.rb2_k2, stage.rb2_b2)
    z = conv2d(z, stage.rec_k, stage.rec_b, stride=1, padding=1)
    return r + z


def _stage_scalars(model: UnrolledModel, gamma: float):
    cfg = model.config
    rhos = sigmas = None
    if cfg.dus_rho or cfg.dus_sigma:
        cond = condition_forward(model.cm, gamma, cfg.stages)
        if cfg.dus_rho:
            rhos = cond.rhos
        if cfg.dus_sigma:
            sigmas = cond.sigmas
    if rhos is None:
        rhos = [st.rho_bar for st in model.stages]
    if sigmas is None:
        sigmas = [st.sigma_bar for st in model.stages]
    return rhos, sigmas


def _run_stages(model: UnrolledModel, y: Tensor, op: SamplingOperator,
                rhos, sigmas, record_trace: bool):
    x = init_transpose(op, y)
    trace = [x]
    for k in range(model.config.stages):
        r = gradient_step(x, y, op, rhos[k])
        x = proximal_step(model.stages[k], r, sigmas[k])
        if record_trace:
            trace.append(x)
    if not record_trace:
        trace = [trace[0], x] if model.config.stages else [trace[0]]
    return x, trace


def reconstruct(model: UnrolledModel, y: Tensor, op: SamplingOperator, gamma: float,
                allow_extrapolation: bool = False, record_trace: bool = True):
    """Run the K unrolled stages; returns (image, [x_0 .. x_K]).

    With the cross-block flag off, every B x B block is reconstructed
    independently from its own measurement column and the blocks are
    stitched back together, which is exactly equivalent to running the
    model on each block alone.
    """
    cfg = model.config
    if op.block_size != cfg.block_size:
        raise ValueError(
            f"operator block size {op.block_size} does not match model block size {cfg.block_size}"
        )
    if y.data.ndim != 3 or y.data.shape[0] != op.m:
        raise ValueError(f"measurements must be M x h x w with M = {op.m}, got shape {y.shape}")
    if not allow_extrapolation:
        if not any(math.isclose(r, gamma, rel_tol=0.0, abs_tol=1e-9) for r in cfg.ratios):
            raise ValueError(
                f"ratio {gamma} was not trained; pass allow_extrapolation=True to override"
            )
    elif not 0.0 < gamma <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {gamma}")

    rhos, sigmas = _stage_scalars(model, gamma)

    if cfg.cbs:
        return _run_stages(model, y, op, rhos, sigmas, record_trace)

    # Per-block reconstruction: block (i, j) of the image corresponds to
    # measurement column y[:, i, j].
    _, gh, gw = y.data.shape
    block_traces = []
    for i in range(gh):
        row = []
        for j in range(gw):
            yb = y[:, i:i + 1, j:j + 1]
            _, tb = _run_stages(model, yb, op, rhos, sigmas, record_trace)
            row.append(tb)
        block_traces.append(row)
    n_entries = len(block_traces[0][0])
    trace = []
    for k in range(n_entries):
        rows = [concat([block_traces[i][j][k] for j in range(gw)], axis=2) for i in range(gh)]
        trace.append(concat(rows, axis=1))
    return trace[-1], trace
