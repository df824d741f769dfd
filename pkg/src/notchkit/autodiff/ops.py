"""Differentiable layer ops over ``Tensor``.

Shapes follow the NCHW convention; convolution weights are ``(O, I, k, k)``.
The transposed convolution is *defined* as the adjoint of ``conv2d`` with
the same weight and stride (weight laid out ``(C_in, C_out, k, k)`` from its
own point of view), so the pair shares its index arithmetic and the adjoint
identity <conv(x), y> == <x, conv_t(y)> holds to rounding error.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError
from .tensor import Tensor

__all__ = [
    "conv2d", "conv2d_transpose", "avg_pool2d", "global_avg_pool",
    "upsample_nearest", "upsample_bilinear", "concat_channels", "linear",
    "relu", "sigmoid", "softmax_channels", "l1_loss", "cross_entropy",
    "filter_with_kernels", "apply_kernel_field",
]


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._parents for t in tensors)


# --------------------------------------------------------------------------
# convolution plumbing
# --------------------------------------------------------------------------

def _strided_windows(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> (N, C, Ho, Wo, k, k) view."""
    v = sliding_window_view(xp, (k, k), axis=(2, 3))
    return v[:, :, ::stride, ::stride]


def _conv_forward(x: np.ndarray, w: np.ndarray, stride: int, padding: int):
    n, c, _, _ = x.shape
    o, ci, k, _ = w.shape
    if ci != c:
        raise DimensionError(f"conv2d: input has {c} channels, weight expects {ci}")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    win = _strided_windows(xp, k, stride)
    ho, wo = win.shape[2], win.shape[3]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * k * k)
    out = cols @ w.reshape(o, -1).T
    out = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), cols, xp.shape


def _scatter_windows(gwin: np.ndarray, padded_shape, k: int, stride: int) -> np.ndarray:
    """Adjoint of ``_strided_windows``: add (N,C,Ho,Wo,k,k) back into place."""
    gx = np.zeros(padded_shape, dtype=np.float32)
    ho, wo = gwin.shape[2], gwin.shape[3]
    for a in range(k):
        for b in range(k):
            gx[:, :, a:a + ho * stride:stride, b:b + wo * stride:stride] += gwin[:, :, :, :, a, b]
    return gx


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution (cross-correlation), float32, zero padding."""
    if w.data.ndim != 4:
        raise DimensionError(f"conv2d: weight must be (O, I, k, k), got {w.data.shape}")
    if stride < 1:
        raise DimensionError(f"conv2d: stride must be >= 1, got {stride}")
    out, cols, padded_shape = _conv_forward(x.data, w.data, stride, padding)
    if b is not None:
        out += b.data[None, :, None, None]

    parents = (x, w) if b is None else (x, w, b)
    if not _needs_grad(*parents):
        return Tensor(out, op="conv2d")

    n, c = x.data.shape[:2]
    o, _, k, _ = w.data.shape

    def backward(g: np.ndarray) -> None:
        ho, wo = g.shape[2], g.shape[3]
        gmat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, o)
        w._accumulate((gmat.T @ cols).reshape(w.data.shape))
        gwin = (gmat @ w.data.reshape(o, -1)).reshape(n, ho, wo, c, k, k).transpose(0, 3, 1, 2, 4, 5)
        gxp = _scatter_windows(gwin, padded_shape, k, stride)
        if padding:
            gxp = gxp[:, :, padding:-padding, padding:-padding]
        x._accumulate(gxp)
        if b is not None:
            b._accumulate(g.sum(axis=(0, 2, 3)))

    return Tensor(out, op="conv2d", parents=parents, backward=backward)


def conv2d_transpose(x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
    """Transposed convolution: the adjoint of ``conv2d(_, w, stride=stride)``.

    ``x`` is ``(N, C_in, H, W)`` and the weight ``(C_in, C_out, k, k)``;
    output is ``(N, C_out, (H-1)*stride + k, (W-1)*stride + k)``.
    """
    if w.data.ndim != 4:
        raise DimensionError(f"conv2d_transpose: weight must be 4-D, got {w.data.shape}")
    n, c, h, wd = x.data.shape
    ci, co, k, _ = w.data.shape
    if ci != c:
        raise DimensionError(f"conv2d_transpose: input has {c} channels, weight expects {ci}")
    if stride < 1:
        raise DimensionError(f"conv2d_transpose: stride must be >= 1, got {stride}")
    ht, wt = (h - 1) * stride + k, (wd - 1) * stride + k

    tmp = np.tensordot(x.data, w.data, axes=([1], [0]))        # (N, H, W, C_out, k, k)
    gwin = np.ascontiguousarray(tmp.transpose(0, 3, 1, 2, 4, 5))
    out = _scatter_windows(gwin, (n, co, ht, wt), k, stride)

    if not _needs_grad(x, w):
        return Tensor(out, op="conv2d_transpose")

    def backward(g: np.ndarray) -> None:
        # d/dx: run the forward convolution over the incoming gradient.
        gx, _, _ = _conv_forward(g, np.ascontiguousarray(w.data), stride, 0)
        x._accumulate(gx)
        # d/dw[o_in, o_out, a, b] = sum_npq x[n, o_in, p, q] * g[n, o_out, p*s+a, q*s+b]
        gwn = _strided_windows(g, k, stride)                   # (N, C_out, H, W, k, k)
        w._accumulate(np.einsum("nihw,nohwab->ioab", x.data, gwn, optimize=True))

    return Tensor(out, op="conv2d_transpose", parents=(x, w), backward=backward)


# --------------------------------------------------------------------------
# pooling / resampling
# --------------------------------------------------------------------------

def avg_pool2d(x: Tensor, k: int = 2) -> Tensor:
    """Non-overlapping k x k mean pooling; sides must divide by k."""
    n, c, h, w = x.data.shape
    if h % k or w % k:
        raise DimensionError(f"avg_pool2d: {h}x{w} not divisible by window {k}")
    out = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    if not _needs_grad(x):
        return Tensor(out, op="avg_pool2d")

    def backward(g: np.ndarray) -> None:
        gx = np.repeat(np.repeat(g, k, axis=2), k, axis=3) * np.float32(1.0 / (k * k))
        x._accumulate(gx)

    return Tensor(out, op="avg_pool2d", parents=(x,), backward=backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, C) spatial mean."""
    n, c, h, w = x.data.shape
    out = x.data.mean(axis=(2, 3))
    if not _needs_grad(x):
        return Tensor(out, op="global_avg_pool")

    def backward(g: np.ndarray) -> None:
        x._accumulate(np.broadcast_to(g[:, :, None, None] / np.float32(h * w), x.data.shape))

    return Tensor(out, op="global_avg_pool", parents=(x,), backward=backward)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)
    if not _needs_grad(x):
        return Tensor(out, op="upsample_nearest")
    n, c, h, w = x.data.shape

    def backward(g: np.ndarray) -> None:
        x._accumulate(g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)))

    return Tensor(out, op="upsample_nearest", parents=(x,), backward=backward)


_BILINEAR_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _bilinear_matrix(n_in: int, factor: int) -> np.ndarray:
    """Dense (n_in*factor, n_in) 1-D interpolation matrix, half-pixel centres."""
    key = (n_in, factor)
    cached = _BILINEAR_CACHE.get(key)
    if cached is not None:
        return cached
    n_out = n_in * factor
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) / factor - 0.5
    i0 = np.floor(pos).astype(np.int64)
    t = (pos - i0).astype(np.float32)
    m = np.zeros((n_out, n_in), dtype=np.float32)
    rows = np.arange(n_out)
    np.add.at(m, (rows, np.clip(i0, 0, n_in - 1)), 1.0 - t)
    np.add.at(m, (rows, np.clip(i0 + 1, 0, n_in - 1)), t)
    _BILINEAR_CACHE[key] = m
    return m


def upsample_bilinear(x: Tensor, factor: int) -> Tensor:
    """Separable bilinear upsampling (half-pixel convention).

    Implemented as y = Mr @ x @ Mc^T with dense interpolation matrices so the
    backward pass is the exact adjoint (transposed matrices).
    """
    n, c, h, w = x.data.shape
    mr = _bilinear_matrix(h, factor)
    mc = _bilinear_matrix(w, factor)
    out = np.matmul(np.matmul(mr, x.data), mc.T)
    if not _needs_grad(x):
        return Tensor(out, op="upsample_bilinear")

    def backward(g: np.ndarray) -> None:
        x._accumulate(np.matmul(np.matmul(mr.T, g), mc))

    return Tensor(out, op="upsample_bilinear", parents=(x,), backward=backward)


def concat_channels(parts: list[Tensor]) -> Tensor:
    out = np.concatenate([p.data for p in parts], axis=1)
    if not _needs_grad(*parts):
        return Tensor(out, op="concat_channels")
    sizes = [p.data.shape[1] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            p._accumulate(g[:, lo:hi])

    return Tensor(out, op="concat_channels", parents=tuple(parts), backward=backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """(N, F) @ (F, M) + (M,)"""
    out = x.data @ w.data + b.data
    if not _needs_grad(x, w, b):
        return Tensor(out, op="linear")

    def backward(g: np.ndarray) -> None:
        x._accumulate(g @ w.data.T)
        w._accumulate(x.data.T @ g)
        b._accumulate(g.sum(axis=0))

    return Tensor(out, op="linear", parents=(x, w, b), backward=backward)


# --------------------------------------------------------------------------
# activations
# --------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)
    if not _needs_grad(x):
        return Tensor(out, op="relu")
    mask = x.data > 0

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * mask)

    return Tensor(out, op="relu", parents=(x,), backward=backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)
    if not _needs_grad(x):
        return Tensor(out, op="sigmoid")

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * out * (1.0 - out))

    return Tensor(out, op="sigmoid", parents=(x,), backward=backward)


def softmax_channels(x: Tensor, axis: int = 1) -> Tensor:
    """Softmax along one axis (channel axis by default), numerically shifted."""
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    if not _needs_grad(x):
        return Tensor(s, op="softmax")

    def backward(g: np.ndarray) -> None:
        x._accumulate(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return Tensor(s, op="softmax", parents=(x,), backward=backward)


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------

def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error; subgradient at zero is taken as 0."""
    if pred.data.shape != target.data.shape:
        raise DimensionError(
            f"l1_loss: shapes differ, {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    out = np.asarray(np.abs(diff).mean(), dtype=np.float32)
    if not _needs_grad(pred, target):
        return Tensor(out, op="l1_loss")
    inv_n = np.float32(1.0 / diff.size)

    def backward(g: np.ndarray) -> None:
        sg = np.sign(diff) * inv_n * g
        pred._accumulate(sg.astype(np.float32))
        if target.requires_grad or target._parents:
            target._accumulate((-sg).astype(np.float32))

    return Tensor(out, op="l1_loss", parents=(pred, target), backward=backward)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of integer labels against raw logits (N, K)."""
    z = logits.data
    if z.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be (N, K), got {z.shape}")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (z.shape[0],):
        raise DimensionError(
            f"cross_entropy: labels must be ({z.shape[0]},), got {y.shape}")
    if y.min() < 0 or y.max() >= z.shape[1]:
        raise DimensionError("cross_entropy: label out of range")
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    lse = np.log(e.sum(axis=1)) + m[:, 0]
    out = np.asarray((lse - z[np.arange(z.shape[0]), y]).mean(), dtype=np.float32)
    if not _needs_grad(logits):
        return Tensor(out, op="cross_entropy")
    p = e / e.sum(axis=1, keepdims=True)
    n = z.shape[0]

    def backward(g: np.ndarray) -> None:
        gz = p.copy()
        gz[np.arange(n), y] -= 1.0
        logits._accumulate(gz * (g / np.float32(n)))

    return Tensor(out, op="cross_entropy", parents=(logits,), backward=backward)


# --------------------------------------------------------------------------
# per-pixel kernel filtering
# --------------------------------------------------------------------------

def _fold_replicate_adjoint(gpad: np.ndarray, r: int) -> np.ndarray:
    """Adjoint of replicate ('edge') padding of width r on the last two axes."""
    core = gpad[:, :, r:gpad.shape[2] - r, :].copy()
    core[:, :, 0, :] += gpad[:, :, :r, :].sum(axis=2)
    core[:, :, -1, :] += gpad[:, :, gpad.shape[2] - r:, :].sum(axis=2)
    out = core[:, :, :, r:core.shape[3] - r].copy()
    out[:, :, :, 0] += core[:, :, :, :r].sum(axis=3)
    out[:, :, :, -1] += core[:, :, :, core.shape[3] - r:].sum(axis=3)
    return out


def filter_with_kernels(x: Tensor, kernels: Tensor) -> Tensor:
    """Apply a per-pixel kernel field: out[n,c,h,w] = sum_k win_k(x)[...] * kf[n,k,h,w].

    ``x`` is (N, C, H, W); ``kernels`` is (N, K*K, H, W) with K odd, the K*K
    axis in row-major window order.  Borders use replicate padding.  One
    kernel field is shared across the image channels.  With softmax-
    normalised kernels and inputs in [0, 1] the output is a per-pixel convex
    combination, hence already inside [0, 1]; no clamp happens here so the
    op stays linear in ``x``.
    """
    n, c, h, w = x.data.shape
    nk, k2, hk, wk = kernels.data.shape
    k = int(round(k2 ** 0.5))
    if k * k != k2 or k % 2 == 0:
        raise DimensionError(f"kernel field needs an odd K with K*K channels, got {k2}")
    if (nk, hk, wk) != (n, h, w):
        raise DimensionError(
            f"kernel field {kernels.data.shape} does not match image {x.data.shape}")
    r = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (r, r), (r, r)), mode="edge")
    win = sliding_window_view(xp, (k, k), axis=(2, 3)).reshape(n, c, h, w, k2)
    out = np.einsum("nchwk,nkhw->nchw", win, kernels.data, optimize=True)

    if not _needs_grad(x, kernels):
        return Tensor(out, op="pixelwise_filter")

    def backward(g: np.ndarray) -> None:
        kernels._accumulate(np.einsum("nchw,nchwk->nkhw", g, win, optimize=True))
        gpad = np.zeros_like(xp)
        for idx in range(k2):
            a, b = divmod(idx, k)
            gpad[:, :, a:a + h, b:b + w] += g * kernels.data[:, idx:idx + 1]
        x._accumulate(_fold_replicate_adjoint(gpad, r))

    return Tensor(out, op="pixelwise_filter", parents=(x, kernels), backward=backward)


def apply_kernel_field(image_nchw: np.ndarray, kernels_nkhw: np.ndarray) -> np.ndarray:
    """Plain-numpy forward of ``filter_with_kernels`` (no graph, no grad)."""
    out = filter_with_kernels(Tensor(image_nchw), Tensor(kernels_nkhw))
    return out.data
