"""Functional layers: forward returns (output, cache), backward consumes it.

Layers hold no state; parameters live in the Network and are passed in
explicitly, which keeps the finite-difference gradient checker a plain
loop over arrays.

The `inplace` switches let the training loop reuse large activation
buffers it owns; the default keeps every input untouched.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import kernels


def conv2d_forward(x, w, b):
    """Same-padded KxK convolution (K odd), shared across the batch.

    1x1 kernels dispatch to a batched matmul: at feature-map sizes the
    scalar loop is overhead-bound while BLAS is not.
    """
    B, C, H, W = x.shape
    O, wc, K, _ = w.shape
    if wc != C:
        raise ShapeError(f"conv weight expects {wc} input channels, got {C}")
    if K == 1:
        flat = np.ascontiguousarray(x).reshape(B, C, H * W)
        y = (np.matmul(w[:, :, 0, 0], flat) + b[:, None]).reshape(B, O, H, W)
        return y, ("1x1", x, w)
    pad = K // 2
    xp = np.zeros((B, C, H + 2 * pad, W + 2 * pad))
    xp[:, :, pad:H + pad, pad:W + pad] = x
    y = np.empty((B, O, H, W))
    kernels.conv_fwd(xp, w, b, y)
    return y, ("kxk", xp, w, pad)


def conv2d_backward(cache, dy, need_dx: bool = True):
    """Returns (dx, dw, db); dx is None when need_dx is False."""
    if cache[0] == "1x1":
        _, x, w = cache
        B, C, H, W = x.shape
        O = w.shape[0]
        dflat = np.ascontiguousarray(dy).reshape(B, O, H * W)
        xflat = np.ascontiguousarray(x).reshape(B, C, H * W)
        dw = np.einsum("bop,bcp->oc", dflat, xflat)[:, :, None, None]
        db = dflat.sum(axis=(0, 2))
        if not need_dx:
            return None, dw, db
        dx = np.matmul(w[:, :, 0, 0].T, dflat).reshape(B, C, H, W)
        return dx, dw, db
    _, xp, w, pad = cache
    dw = np.empty_like(w)
    db = np.empty(w.shape[0])
    dyc = np.ascontiguousarray(dy)
    if not need_dx:
        kernels.conv_bwd_nodx(xp, dyc, dw, db)
        return None, dw, db
    dxp = np.empty_like(xp)
    kernels.conv_bwd(xp, w, dyc, dxp, dw, db)
    dx = dxp[:, :, pad:xp.shape[2] - pad, pad:xp.shape[3] - pad] if pad else dxp
    return np.ascontiguousarray(dx), dw, db


def relu_forward(x, inplace: bool = False):
    """Cache is the positive-side mask, which the grad checker also reads
    as the layer's routing."""
    mask = x > 0.0
    y = np.multiply(x, mask, out=x if inplace else None)
    return y, mask


def relu_backward(cache, dy, inplace: bool = False):
    return np.multiply(dy, cache, out=dy if inplace else None)


def maxpool2_forward(x):
    B, C, H, W = x.shape
    if H % 2 or W % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {H}x{W}")
    y = np.empty((B, C, H // 2, W // 2))
    idx = np.empty((B, C, H // 2, W // 2), dtype=np.int8)
    kernels.maxpool2_fwd(np.ascontiguousarray(x), y, idx)
    return y, (idx, H, W)


def maxpool2_backward(cache, dy):
    idx, H, W = cache
    dx = np.empty((dy.shape[0], dy.shape[1], H, W))
    kernels.maxpool2_bwd(np.ascontiguousarray(dy), idx, dx)
    return dx


def linear_forward(x, w, b):
    """x: (B, n_in), w: (n_out, n_in), b: (n_out,)."""
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"linear expects {w.shape[1]} inputs, got {x.shape[1]}")
    return x @ w.T + b, (x, w)


def linear_backward(cache, dy):
    x, w = cache
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(p, dp):
    """Jacobian-vector product through softmax given its output p."""
    return p * (dp - (dp * p).sum(axis=-1, keepdims=True))


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
