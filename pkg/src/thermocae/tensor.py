"""Dense float64 arrays with reverse-mode differentiation.

Covers exactly what a strided convolutional autoencoder trained on an
MS-SSIM objective needs: 2-D cross-correlation and its transpose, affine
layers, pointwise nonlinearities, elementwise arithmetic, pooling and mean
reductions. Gradients are recorded on an explicit tape (`Graph`) that is
rebuilt for every forward pass; insertion order is the topological order,
so the backward sweep is a single reverse walk.

Heavy lifting is delegated to numpy (strided window views feeding BLAS
matmuls); the reduction order inside a batch is therefore fixed and results
are bit-reproducible for identical inputs on the same build.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .rng import Rng

Scalar = Union[int, float]


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of the autoencoder's strided convolutions.

    With the defaults, a forward convolution exactly halves even spatial
    sizes and the transposed convolution exactly doubles them:
      out = floor((in + 2*padding - kernel)/stride) + 1
      out_t = (in - 1)*stride - 2*padding + kernel + output_padding
    """

    kernel: int = 3
    stride: int = 2
    padding: int = 1
    output_padding: int = 1

    def out_size(self, in_size: int) -> int:
        return (in_size + 2 * self.padding - self.kernel) // self.stride + 1

    def out_size_transposed(self, in_size: int) -> int:
        return (
            (in_size - 1) * self.stride
            - 2 * self.padding
            + self.kernel
            + self.output_padding
        )


class Tensor:
    """N-dimensional float64 array with an optional gradient buffer.

    Layout is row-major; 4-D tensors are (batch, channel, height, width).
    `grad` is populated by `Graph.backward` and overwritten on each call.
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node_id: Optional[int] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a one-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @staticmethod
    def zeros(shape: Sequence[int], requires_grad: bool = False) -> "Tensor":
        return Tensor(np.zeros(shape), requires_grad=requires_grad)

    @staticmethod
    def ones(shape: Sequence[int], requires_grad: bool = False) -> "Tensor":
        return Tensor(np.ones(shape), requires_grad=requires_grad)

    # elementwise arithmetic (same-shape tensors or python scalars; the
    # autoencoder never needs broadcasting, so none is offered)
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def mean(self, axis=None) -> "Tensor":
        return mean(self, axis)

    def sum(self, axis=None) -> "Tensor":
        return tsum(self, axis)

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        return reshape(self, shape)


class _Node:
    """One tape entry: the op's output, its inputs, and a pullback."""

    __slots__ = ("output", "inputs", "backward_fn")

    def __init__(self, output: Tensor, inputs: tuple, backward_fn: Callable):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn


_ACTIVE: list["Graph"] = []


class Graph:
    """Append-only operation tape; use as a context manager to record.

    A graph is built fresh for every forward pass and is confined to one
    logical thread. Every node's inputs precede it on the tape, so the
    backward traversal is one reverse sweep visiting each node exactly once.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Graph":
        _ACTIVE.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _ACTIVE.pop()
        return False

    def backward(self, loss: Tensor) -> None:
        """Populate `.grad` of every tracked tensor with d(loss)/d(tensor).

        Gradients are overwritten, never accumulated across calls.
        """
        if loss.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        tensors: dict[int, Tensor] = {id(loss): loss}
        for node in reversed(self.nodes):
            g = grads.get(id(node.output))
            if g is None:
                continue
            for t, ig in zip(node.inputs, node.backward_fn(g)):
                if ig is None:
                    continue
                key = id(t)
                tensors[key] = t
                if key in grads:
                    grads[key] = grads[key] + ig
                else:
                    grads[key] = ig
        for key, t in tensors.items():
            if t.requires_grad:
                t.grad = np.ascontiguousarray(grads[key])


def _track(out: Tensor, inputs: tuple, backward_fn: Callable) -> Tensor:
    """Record an op on the active graph if any input is being tracked."""
    if _ACTIVE and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        graph = _ACTIVE[-1]
        out.node_id = len(graph.nodes)
        graph.nodes.append(_Node(out, inputs, backward_fn))
    return out


def _as_pair(a, b) -> tuple[Tensor, Tensor]:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b) -> Tensor:
    if isinstance(b, Tensor) and isinstance(a, Tensor):
        a, b = _as_pair(a, b)
        out = Tensor(a.data + b.data)
        return _track(out, (a, b), lambda g: (g, g))
    if not isinstance(a, Tensor):
        a, b = b, a
    s = float(b)
    out = Tensor(a.data + s)
    return _track(out, (a,), lambda g: (g,))


def sub(a, b) -> Tensor:
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        a, b = _as_pair(a, b)
        out = Tensor(a.data - b.data)
        return _track(out, (a, b), lambda g: (g, -g))
    if isinstance(a, Tensor):  # tensor - scalar
        out = Tensor(a.data - float(b))
        return _track(out, (a,), lambda g: (g,))
    out = Tensor(float(a) - b.data)  # scalar - tensor
    return _track(out, (b,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    if isinstance(b, Tensor) and isinstance(a, Tensor):
        a, b = _as_pair(a, b)
        out = Tensor(a.data * b.data)
        ad, bd = a.data, b.data
        return _track(out, (a, b), lambda g: (g * bd, g * ad))
    if not isinstance(a, Tensor):
        a, b = b, a
    s = float(b)
    out = Tensor(a.data * s)
    return _track(out, (a,), lambda g: (g * s,))


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_pair(a, b)
    out = Tensor(a.data / b.data)
    ad, bd = a.data, b.data

    def bwd(g):
        ga = g / bd if a.requires_grad else None
        gb = -g * ad / (bd * bd) if b.requires_grad else None
        return ga, gb

    return _track(out, (a, b), bwd)


def pos_pow(x: Tensor, p: float) -> Tensor:
    """x**p on the positive part; zero (value and gradient) where x <= 0.

    The clamp keeps MS-SSIM finite when a contrast-structure term goes
    negative on anticorrelated patches.
    """
    mask = x.data > 0.0
    safe = np.where(mask, x.data, 1.0)
    out = Tensor(np.where(mask, safe**p, 0.0))

    def bwd(g):
        return (np.where(mask, p * safe ** (p - 1.0), 0.0) * g,)

    return _track(out, (x,), bwd)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0.0  # subgradient at 0 defined as 0
    return _track(out, (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = Tensor(s)
    return _track(out, (x,), lambda g: (g * s * (1.0 - s),))


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation kind '{kind}'")


# ---------------------------------------------------------------------------
# shape and reduction ops


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    out = Tensor(x.data.reshape(shape))
    return _track(out, (x,), lambda g: (g.reshape(old),))


def mean(x: Tensor, axis=None) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    count = float(np.prod([x.shape[a] for a in axes])) if axes else float(x.size)
    return _reduce(x, axis, np.mean, 1.0 / count)


def tsum(x: Tensor, axis=None) -> Tensor:
    return _reduce(x, axis, np.sum, 1.0)


def _norm_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _reduce(x: Tensor, axis, fn, scale: float) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    out = Tensor(fn(x.data, axis=axes))
    shape = x.shape

    def bwd(g):
        ge = np.expand_dims(g, axes) if g.ndim else g
        return (np.broadcast_to(ge, shape) * scale,)

    return _track(out, (x,), bwd)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 mean pooling with stride 2 (trailing odd row/column dropped)."""
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    d = x.data[:, :, : 2 * h2, : 2 * w2].reshape(n, c, h2, 2, w2, 2)
    out = Tensor(d.mean(axis=(3, 5)))

    def bwd(g):
        gx = np.zeros((n, c, h, w))
        gx[:, :, : 2 * h2, : 2 * w2] = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
        return (gx,)

    return _track(out, (x,), bwd)


# ---------------------------------------------------------------------------
# linear layers


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map: rows of x (N,F) times w (F,G) plus bias (G,)."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"dense: input {x.shape} incompatible with weight {w.shape}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"dense: bias {b.shape} incompatible with weight {w.shape}")
    out = Tensor(x.data @ w.data + b.data)
    xd, wd = x.data, w.data

    def bwd(g):
        gx = g @ wd.T if x.requires_grad else None
        gw = xd.T @ g if w.requires_grad else None
        gb = g.sum(axis=0) if b.requires_grad else None
        return gx, gw, gb

    return _track(out, (x, w, b), bwd)


# ---------------------------------------------------------------------------
# convolution: raw kernels shared by forward and backward passes


def _corr2d(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Cross-correlation of x (N,Ci,H,W) with w (Co,Ci,kh,kw)."""
    kh, kw = w.shape[2], w.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(win, w, axes=((1, 4, 5), (1, 2, 3)))  # N,Ho,Wo,Co
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _corr2d_grad_w(x: np.ndarray, g: np.ndarray, stride: int, pad: int, kh: int, kw: int) -> np.ndarray:
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = g.shape[2], g.shape[3]
    win = win[:, :, :ho, :wo]
    return np.tensordot(g, win, axes=((0, 2, 3), (0, 2, 3)))  # Co,Ci,kh,kw


def _corr2d_grad_x(
    g: np.ndarray, w: np.ndarray, stride: int, pad: int, out_hw: tuple[int, int]
) -> np.ndarray:
    """Adjoint of _corr2d: scatter g (N,Co,Ho,Wo) back through w to (N,Ci,H,W)."""
    n, _, ho, wo = g.shape
    ci, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    h, wd = out_hw
    canvas = np.zeros((n, ci, h + 2 * pad + stride, wd + 2 * pad + stride))
    gt = np.tensordot(g, w, axes=((1,), (0,)))  # N,Ho,Wo,Ci,kh,kw
    for ki in range(kh):
        for kj in range(kw):
            canvas[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride] += gt[
                :, :, :, :, ki, kj
            ].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(canvas[:, :, pad : pad + h, pad : pad + wd])


def correlate2d(
    x: Tensor, w: Tensor, b: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """General tracked cross-correlation; the primitive behind conv2d.

    x: (N,Ci,H,W), w: (Co,Ci,kh,kw), optional bias (Co,).
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"correlate2d needs 4-D input and weight, got {x.shape} and {w.shape}")
    if x.size == 0 or w.size == 0:
        raise ValueError("correlate2d rejects zero-sized tensors")
    n, ci, h, wd = x.shape
    co, ci_w, kh, kw = w.shape
    if ci != ci_w:
        raise ValueError(f"correlate2d: input has {ci} channels but weight expects {ci_w}")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError(
            f"correlate2d: kernel {kh}x{kw} with padding {padding} does not fit input {h}x{wd}"
        )
    if b is not None and b.shape != (co,):
        raise ValueError(f"correlate2d: bias {b.shape} incompatible with {co} output channels")

    out_data = _corr2d(x.data, w.data, stride, padding)
    if b is not None:
        out_data += b.data[None, :, None, None]
    out = Tensor(out_data)
    xd = x.data

    def bwd(g):
        gx = _corr2d_grad_x(g, w.data, stride, padding, (h, wd)) if x.requires_grad else None
        gw = _corr2d_grad_w(xd, g, stride, padding, kh, kw) if w.requires_grad else None
        if b is None:
            return gx, gw
        gb = g.sum(axis=(0, 2, 3)) if b.requires_grad else None
        return gx, gw, gb

    inputs = (x, w) if b is None else (x, w, b)
    return _track(out, inputs, bwd)


def conv2d(x: Tensor, w: Tensor, b: Tensor, spec: ConvSpec = ConvSpec()) -> Tensor:
    """Strided convolution per spec; halves even spatial sizes at defaults."""
    if w.ndim != 4 or w.shape[2] != spec.kernel or w.shape[3] != spec.kernel:
        raise ValueError(f"conv2d: weight {w.shape} does not match kernel size {spec.kernel}")
    return correlate2d(x, w, b, stride=spec.stride, padding=spec.padding)


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor, spec: ConvSpec = ConvSpec()) -> Tensor:
    """Transposed convolution: the adjoint of conv2d applied as a forward map.

    x: (N,Ci,h,w), w: (Ci,Co,kh,kw); doubles spatial size at defaults.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(
            f"conv_transpose2d needs 4-D input and weight, got {x.shape} and {w.shape}"
        )
    if x.size == 0 or w.size == 0:
        raise ValueError("conv_transpose2d rejects zero-sized tensors")
    n, ci, h, wd = x.shape
    ci_w, co, kh, kw = w.shape
    if ci != ci_w:
        raise ValueError(f"conv_transpose2d: input has {ci} channels but weight expects {ci_w}")
    if kh != spec.kernel or kw != spec.kernel:
        raise ValueError(f"conv_transpose2d: weight {w.shape} does not match kernel {spec.kernel}")
    if b.shape != (co,):
        raise ValueError(f"conv_transpose2d: bias {b.shape} incompatible with {co} channels")
    ho = spec.out_size_transposed(h)
    wo = spec.out_size_transposed(wd)

    # the input plays the role of conv2d's output gradient, scattered
    # through the kernel onto the upsampled canvas
    out_data = _corr2d_grad_x(x.data, w.data, spec.stride, spec.padding, (ho, wo))
    out_data += b.data[None, :, None, None]
    out = Tensor(out_data)
    xd = x.data

    def bwd(g):
        gx = _corr2d(g, w.data, spec.stride, spec.padding) if x.requires_grad else None
        gw = (
            _corr2d_grad_w(g, xd, spec.stride, spec.padding, kh, kw)
            if w.requires_grad
            else None
        )
        gb = g.sum(axis=(0, 2, 3)) if b.requires_grad else None
        return gx, gw, gb

    return _track(out, (x, w, b), bwd)


# ---------------------------------------------------------------------------
# gradient verification


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-5,
    n_samples: int = 50,
    seed: int = 0x6EAD,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples up to n_samples coordinates of x; the relative error is
    |analytic - numeric| / max(1, |analytic|).
    """
    x = Tensor(x.data.copy(), requires_grad=True)
    with Graph() as g:
        loss = f(x)
    g.backward(loss)
    analytic = x.grad.reshape(-1).copy()

    rng = Rng(seed)
    total = x.size
    if n_samples >= total:
        coords = list(range(total))
    else:
        coords = sorted(rng.permutation(total)[:n_samples])

    flat = x.data.reshape(-1)
    worst = 0.0
    for idx in coords:
        orig = flat[idx]
        flat[idx] = orig + h
        up = f(Tensor(x.data)).item()
        flat[idx] = orig - h
        dn = f(Tensor(x.data)).item()
        flat[idx] = orig
        numeric = (up - dn) / (2.0 * h)
        err = abs(analytic[idx] - numeric) / max(1.0, abs(analytic[idx]))
        worst = max(worst, err)
    return worst
