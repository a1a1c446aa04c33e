"""Minimal reverse-mode autodiff on dense numpy arrays.

A Tensor wraps an ndarray together with an optional gradient buffer and a
record of how it was produced. Calling ``backward()`` on a scalar walks the
graph in reverse topological order and accumulates dLoss/dNode into the
``grad`` buffer of every node that requires gradients. Repeated backward
calls without ``zero_grad`` keep accumulating.

The only structural ops are 1-D cross-correlation (``conv1d``) and its exact
linear adjoint (``conv1d_adjoint``). The adjoint is the matrix transpose of
the convolution for a fixed input length, which makes weight-tied reversible
layers a provable identity instead of a shape convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one 1-D convolution layer.

    Padding is symmetric zero padding. ``kernel_size`` must be odd so that
    "same" padding is well defined.
    """

    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.in_channels <= 0 or self.out_channels <= 0:
            raise ValueError(f"channel counts must be positive, got "
                             f"{self.in_channels}->{self.out_channels}")
        if self.kernel_size <= 0 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.stride <= 0:
            raise ValueError(f"stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be nonnegative, got {self.padding}")

    def out_length(self, in_length: int) -> int:
        n = (in_length + 2 * self.padding - self.kernel_size) // self.stride + 1
        if n < 1:
            raise ValueError(
                f"input length {in_length} too short for kernel {self.kernel_size} "
                f"with padding {self.padding}")
        return n


class Tensor:
    """Dense array with optional grad buffer and autodiff record."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjps")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64) if not isinstance(data, np.ndarray) \
            else data
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjps = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        """Accumulate dSelf/dNode into ``grad`` of every requires_grad node."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        cotangent: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = cotangent.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
            for parent, vjp in zip(node._parents, node._vjps):
                if not parent.requires_grad:
                    continue
                contrib = vjp(g)
                if id(parent) in cotangent:
                    # out-of-place: contributions may be read-only views
                    cotangent[id(parent)] = cotangent[id(parent)] + contrib
                else:
                    cotangent[id(parent)] = contrib

    # ---- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other, self.dtype)
        out = _make(self.data + other.data, (self, other))
        out._vjps = (lambda g: _unbroadcast(g, self.data.shape),
                     lambda g: _unbroadcast(g, other.data.shape))
        return out

    __radd__ = __add__

    def __neg__(self):
        out = _make(-self.data, (self,))
        out._vjps = (lambda g: -g,)
        return out

    def __sub__(self, other):
        other = _as_tensor(other, self.dtype)
        out = _make(self.data - other.data, (self, other))
        out._vjps = (lambda g: _unbroadcast(g, self.data.shape),
                     lambda g: _unbroadcast(-g, other.data.shape))
        return out

    def __rsub__(self, other):
        return _as_tensor(other, self.dtype) - self

    def __mul__(self, other):
        other = _as_tensor(other, self.dtype)
        out = _make(self.data * other.data, (self, other))
        out._vjps = (lambda g: _unbroadcast(g * other.data, self.data.shape),
                     lambda g: _unbroadcast(g * self.data, other.data.shape))
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other, self.dtype)
        out = _make(self.data / other.data, (self, other))
        out._vjps = (lambda g: _unbroadcast(g / other.data, self.data.shape),
                     lambda g: _unbroadcast(-g * self.data / other.data ** 2,
                                            other.data.shape))
        return out

    def __pow__(self, p):
        if not np.isscalar(p):
            raise TypeError("only scalar exponents are supported")
        out = _make(self.data ** p, (self,))
        out._vjps = (lambda g: g * p * self.data ** (p - 1),)
        return out

    def exp(self):
        val = np.exp(self.data)
        out = _make(val, (self,))
        out._vjps = (lambda g: g * val,)
        return out

    def abs(self):
        out = _make(np.abs(self.data), (self,))
        out._vjps = (lambda g: g * np.sign(self.data),)
        return out

    # ---- reductions and shape ---------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = _make(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, self.data.shape).astype(self.dtype, copy=False)

        out._vjps = (vjp,)
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _make(self.data.reshape(shape), (self,))
        out._vjps = (lambda g: g.reshape(self.data.shape),)
        return out

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x, dtype=np.float64) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: np.ndarray, parents: tuple) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` to undo numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    """Elementwise max(x, slope*x); subgradient at 0 is ``slope``."""
    if not 0.0 <= slope < 1.0 and slope != 1.0:
        raise ValueError(f"slope must be in [0, 1], got {slope}")
    x = _as_tensor(x)
    pos = x.data > 0
    out = _make(np.where(pos, x.data, slope * x.data), (x,))
    out._vjps = (lambda g: g * np.where(pos, 1.0, slope),)
    return out


# ---- convolution ----------------------------------------------------------


def _windows(xp: np.ndarray, kernel_size: int, stride: int, out_len: int) -> np.ndarray:
    """Strided view (batch, in_ch, out_len, kernel_size) over padded input."""
    b, c, _ = xp.shape
    s0, s1, s2 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (b, c, out_len, kernel_size), (s0, s1, s2 * stride, s2))


def _conv1d_raw(x: np.ndarray, k: np.ndarray, stride: int, padding: int) -> np.ndarray:
    out_len = (x.shape[2] + 2 * padding - k.shape[2]) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
    win = _windows(xp, k.shape[2], stride, out_len)
    # (b, in, l, k) x (out, in, k) -> (b, out, l)
    y = np.tensordot(win, k, axes=([1, 3], [1, 2]))
    return np.ascontiguousarray(y.transpose(0, 2, 1))


def _conv1d_kernel_grad(x: np.ndarray, gy: np.ndarray, kshape: tuple,
                        stride: int, padding: int) -> np.ndarray:
    out_len = gy.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
    win = _windows(xp, kshape[2], stride, out_len)
    # (b, in, l, k) x (b, out, l) -> (out, in, k)
    return np.tensordot(gy, win, axes=([0, 2], [0, 2]))


def _conv1d_adjoint_raw(y: np.ndarray, k: np.ndarray, stride: int, padding: int,
                        in_length: int) -> np.ndarray:
    b, _, out_len = y.shape
    ksize = k.shape[2]
    xp = np.zeros((b, k.shape[1], in_length + 2 * padding), dtype=y.dtype)
    # (b, out, l) x (out, in, k) -> (b, l, in, k)
    contrib = np.tensordot(y, k, axes=([1], [0]))
    contrib = contrib.transpose(0, 2, 3, 1)  # (b, in, k, l)
    for t in range(ksize):
        xp[:, :, t:t + stride * out_len:stride] += contrib[:, :, t, :]
    if padding:
        return np.ascontiguousarray(xp[:, :, padding:padding + in_length])
    return xp


def _check_input(x: Tensor, channels: int, what: str):
    if x.data.ndim != 3:
        raise ValueError(f"{what} must have shape (batch, channels, length), "
                         f"got {x.data.shape}")
    if x.data.shape[1] != channels:
        raise ValueError(f"{what} has {x.data.shape[1]} channels, expected {channels}")


def conv1d(x: Tensor, k: Tensor, spec: ConvSpec, bias: Tensor | None = None) -> Tensor:
    """Strided 1-D cross-correlation with optional per-output-channel bias."""
    x, k = _as_tensor(x), _as_tensor(k)
    _check_input(x, spec.in_channels, "conv1d input")
    kshape = (spec.out_channels, spec.in_channels, spec.kernel_size)
    if k.data.shape != kshape:
        raise ValueError(f"kernel shape {k.data.shape} does not match spec {kshape}")
    in_length = x.data.shape[2]
    spec.out_length(in_length)  # raises if output would be empty
    y = _conv1d_raw(x.data, k.data, spec.stride, spec.padding)
    parents = [x, k]
    vjps = [
        lambda g: _conv1d_adjoint_raw(g, k.data, spec.stride, spec.padding, in_length),
        lambda g: _conv1d_kernel_grad(x.data, g, kshape, spec.stride, spec.padding),
    ]
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.data.shape != (spec.out_channels,):
            raise ValueError(f"bias shape {bias.data.shape}, expected ({spec.out_channels},)")
        y = y + bias.data[None, :, None]
        parents.append(bias)
        vjps.append(lambda g: g.sum(axis=(0, 2)))
    out = _make(y, tuple(parents))
    out._vjps = tuple(vjps)
    return out


def conv1d_adjoint(y: Tensor, k: Tensor, spec: ConvSpec,
                   original_input_length: int) -> Tensor:
    """Exact adjoint (matrix transpose) of ``conv1d`` for the given input length.

    Satisfies <conv1d(x, k), y> == <x, conv1d_adjoint(y, k)> for every x of
    length ``original_input_length``. Bias is not part of the linear map and
    is therefore ignored here.
    """
    y, k = _as_tensor(y), _as_tensor(k)
    _check_input(y, spec.out_channels, "conv1d_adjoint input")
    kshape = (spec.out_channels, spec.in_channels, spec.kernel_size)
    if k.data.shape != kshape:
        raise ValueError(f"kernel shape {k.data.shape} does not match spec {kshape}")
    expected = spec.out_length(original_input_length)
    if y.data.shape[2] != expected:
        raise ValueError(
            f"adjoint input length {y.data.shape[2]} inconsistent with original "
            f"input length {original_input_length} (expected {expected})")
    out_data = _conv1d_adjoint_raw(y.data, k.data, spec.stride, spec.padding,
                                   original_input_length)
    out = _make(out_data, (y, k))
    out._vjps = (
        lambda g: _conv1d_raw(g, k.data, spec.stride, spec.padding),
        lambda g: _conv1d_kernel_grad(g, y.data, kshape, spec.stride, spec.padding),
    )
    return out
