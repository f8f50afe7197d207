"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation whose inputs require gradients records its parent tensors
and a backward closure on the output.  Calling ``backward()`` on a scalar
result walks the recorded graph once, in reverse creation order (children
are always created after their parents, so this is a valid topological
order), and accumulates gradients into every tensor that requires them.
Gradients sum over fan-out.  The graph is rebuilt on every forward pass and
a given backward pass may run only once.

All data is stored as contiguous float64; images follow the channels-first
C x H x W convention.
"""

from __future__ import annotations

import itertools

import numpy as np

_SEQ = itertools.count()


class Tensor:
    """A dense array plus optional gradient buffer and graph record."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_seq", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._seq = next(_SEQ)
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Copy of the value with no graph attached."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode pass from a scalar loss.

        Rejects non-scalar losses and repeated passes over the same graph.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise RuntimeError("backward() already ran on this graph")
        nodes = []
        seen = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t._parents)
        # Reverse creation order: every node is visited exactly once, after
        # all tensors computed from it.
        nodes.sort(key=lambda t: t._seq, reverse=True)
        _accumulate(self, np.ones_like(self.data))
        for t in nodes:
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)
        self._consumed = True

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return mul(self, _lift(-1.0))

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def broadcast_to(self, shape) -> "Tensor":
        return broadcast_to(self, shape)

    def __repr__(self):
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _record(out: Tensor, parents, backward_fn) -> Tensor:
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise and shape ops ------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(out, (a, b), backward)


def tensor_sum(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum())

    def backward(g):
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _record(out, (a,), backward)


def getitem(a: Tensor, idx) -> Tensor:
    out = Tensor(a.data[idx])

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accumulate(a, full)

    return _record(out, (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat of an empty sequence")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(sl)])

    return _record(out, tuple(tensors), backward)


def broadcast_to(a: Tensor, shape) -> Tensor:
    out = Tensor(np.broadcast_to(a.data, shape))

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))

    return _record(out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))

    def backward(g):
        # subgradient at exactly 0 is 0
        _accumulate(a, g * (a.data > 0.0))

    return _record(out, (a,), backward)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(a: Tensor) -> Tensor:
    """ln(1 + e^x) in the overflow-safe form max(x, 0) + ln(1 + e^-|x|)."""
    x = a.data
    out = Tensor(np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))))

    def backward(g):
        _accumulate(a, g * _sigmoid(x))

    return _record(out, (a,), backward)


# -- linear maps ---------------------------------------------------------


def fully_connected(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map W x + b for a 1-d input."""
    if x.data.ndim != 1 or weights.data.ndim != 2 or bias.data.ndim != 1:
        raise ValueError("fully_connected expects x (n,), weights (m, n), bias (m,)")
    m, n = weights.data.shape
    if x.data.shape[0] != n or bias.data.shape[0] != m:
        raise ValueError(
            f"fully_connected dimension mismatch: weights {weights.shape}, "
            f"x {x.shape}, bias {bias.shape}"
        )
    out = Tensor(weights.data @ x.data + bias.data)

    def backward(g):
        if weights.requires_grad:
            _accumulate(weights, np.outer(g, x.data))
        if x.requires_grad:
            _accumulate(x, weights.data.T @ g)
        if bias.requires_grad:
            _accumulate(bias, g)

    return _record(out, (x, weights, bias), backward)


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Strided cross-correlation of a C x H x W image with C_out filters.

    Zero padding; output height is (H + 2 padding - k) // stride + 1.
    """
    if x.data.ndim != 3:
        raise ValueError(f"conv2d input must be C x H x W, got shape {x.shape}")
    if kernels.data.ndim != 4:
        raise ValueError(f"conv2d kernels must be C_out x C_in x k x k, got shape {kernels.shape}")
    if stride < 1:
        raise ValueError(f"conv2d stride must be positive, got {stride}")
    if padding < 0:
        raise ValueError(f"conv2d padding must be non-negative, got {padding}")
    c_in, h, w = x.data.shape
    c_out, kc, kh, kw = kernels.data.shape
    if kc != c_in:
        raise ValueError(f"conv2d channel mismatch: input has {c_in}, kernels expect {kc}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ValueError("conv2d kernel larger than padded input")
    if bias is not None and bias.data.shape != (c_out,):
        raise ValueError(f"conv2d bias must have shape ({c_out},), got {bias.shape}")

    if padding:
        xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    s0, s1, s2 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(c_in, kh, kw, h_out, w_out),
        strides=(s0, s1, s2, s1 * stride, s2 * stride),
    )
    out_data = np.tensordot(kernels.data, windows, axes=([1, 2, 3], [0, 1, 2]))
    if bias is not None:
        out_data += bias.data[:, None, None]
    out = Tensor(out_data)

    kd = kernels.data

    def backward(g):
        if kernels.requires_grad:
            _accumulate(kernels, np.tensordot(g, windows, axes=([1, 2], [3, 4])))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=(1, 2)))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(kd[:, :, i, j], g, axes=(0, 0))
                    gxp[:, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += contrib
            if padding:
                gxp = gxp[:, padding:padding + h, padding:padding + w]
            _accumulate(x, gxp)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _record(out, parents, backward)


def conv1x1(x: Tensor, kernels: Tensor) -> Tensor:
    """Per-pixel linear map; conv2d restricted to 1 x 1 kernels."""
    if kernels.data.ndim != 4 or kernels.data.shape[2:] != (1, 1):
        raise ValueError(f"conv1x1 kernels must be C_out x C_in x 1 x 1, got shape {kernels.shape}")
    return conv2d(x, kernels, bias=None, stride=1, padding=0)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange r^2 C x H x W into C x rH x rW.

    out[c, y, x] = in[c r^2 + (y mod r) r + (x mod r), y // r, x // r].
    """
    if r < 1:
        raise ValueError(f"pixel_shuffle factor must be positive, got {r}")
    if x.data.ndim != 3:
        raise ValueError(f"pixel_shuffle input must be C x H x W, got shape {x.shape}")
    c2, h, w = x.data.shape
    if c2 % (r * r) != 0:
        raise ValueError(f"pixel_shuffle channel count {c2} not divisible by r^2 = {r * r}")
    c = c2 // (r * r)
    out_data = (
        x.data.reshape(c, r, r, h, w)
        .transpose(0, 3, 1, 4, 2)
        .reshape(c, h * r, w * r)
    )
    out = Tensor(out_data)

    def backward(g):
        back = (
            g.reshape(c, h, r, w, r)
            .transpose(0, 2, 4, 1, 3)
            .reshape(c2, h, w)
        )
        _accumulate(x, back)

    return _record(out, (x,), backward)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Exact inverse of :func:`pixel_shuffle`."""
    if r < 1:
        raise ValueError(f"pixel_unshuffle factor must be positive, got {r}")
    if x.data.ndim != 3:
        raise ValueError(f"pixel_unshuffle input must be C x H x W, got shape {x.shape}")
    c, hr, wr = x.data.shape
    if hr % r != 0 or wr % r != 0:
        raise ValueError(f"pixel_unshuffle spatial size {hr} x {wr} not divisible by r = {r}")
    h, w = hr // r, wr // r
    out_data = (
        x.data.reshape(c, h, r, w, r)
        .transpose(0, 2, 4, 1, 3)
        .reshape(c * r * r, h, w)
    )
    out = Tensor(out_data)

    def backward(g):
        back = (
            g.reshape(c, r, r, h, w)
            .transpose(0, 3, 1, 4, 2)
            .reshape(c, hr, wr)
        )
        _accumulate(x, back)

    return _record(out, (x,), backward)
