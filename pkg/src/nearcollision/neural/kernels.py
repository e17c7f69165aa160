"""Numba inner loops for convolution and pooling.

The backward convolution fuses the weight-gradient accumulation and the
input-gradient scatter into a single pass per batch item so the working
set (one input plane, one output plane) stays cache resident; separate
passes or an im2col/GEMM formulation both lose to memory movement at
these plane sizes on a single core.

All float arrays are contiguous 64-bit; callers allocate the outputs.
"""

from __future__ import annotations

from numba import njit


@njit(cache=True, fastmath=True)
def conv_fwd(xp, w, b, out):
    """Valid cross-correlation of a pre-padded input.

    xp: (B, C, H+K-1, W+K-1), w: (O, C, K, K), b: (O,), out: (B, O, H, W).
    """
    B = xp.shape[0]
    O, C, K, _ = w.shape
    H = out.shape[2]
    W = out.shape[3]
    for bi in range(B):
        for o in range(O):
            for yy in range(H):
                orow = out[bi, o, yy]
                for xx in range(W):
                    orow[xx] = b[o]
                for c in range(C):
                    for ky in range(K):
                        xrow = xp[bi, c, yy + ky]
                        for kx in range(K):
                            wv = w[o, c, ky, kx]
                            for xx in range(W):
                                orow[xx] += wv * xrow[xx + kx]


@njit(cache=True, fastmath=True)
def conv_bwd(xp, w, dout, dxp, dw, db):
    """Gradients of conv_fwd; dxp/dw/db are overwritten, not accumulated."""
    B, O, H, W = dout.shape
    C = xp.shape[1]
    K = w.shape[2]
    dw[:] = 0.0
    db[:] = 0.0
    dxp[:] = 0.0
    for bi in range(B):
        for o in range(O):
            acc_b = 0.0
            for yy in range(H):
                drow = dout[bi, o, yy]
                for xx in range(W):
                    acc_b += drow[xx]
            db[o] += acc_b
            for c in range(C):
                for ky in range(K):
                    for yy in range(H):
                        drow = dout[bi, o, yy]
                        xrow = xp[bi, c, yy + ky]
                        dxrow = dxp[bi, c, yy + ky]
                        for kx in range(K):
                            wv = w[o, c, ky, kx]
                            acc = 0.0
                            for xx in range(W):
                                acc += xrow[xx + kx] * drow[xx]
                                dxrow[xx + kx] += wv * drow[xx]
                            dw[o, c, ky, kx] += acc


@njit(cache=True, fastmath=True)
def conv_bwd_nodx(xp, dout, dw, db):
    """Weight/bias gradients only, for the first layer whose input
    gradient has no consumer."""
    B, O, H, W = dout.shape
    C = xp.shape[1]
    K = dw.shape[2]
    dw[:] = 0.0
    db[:] = 0.0
    for bi in range(B):
        for o in range(O):
            acc_b = 0.0
            for yy in range(H):
                drow = dout[bi, o, yy]
                for xx in range(W):
                    acc_b += drow[xx]
            db[o] += acc_b
            for c in range(C):
                for ky in range(K):
                    for yy in range(H):
                        drow = dout[bi, o, yy]
                        xrow = xp[bi, c, yy + ky]
                        for kx in range(K):
                            acc = 0.0
                            for xx in range(W):
                                acc += xrow[xx + kx] * drow[xx]
                            dw[o, c, ky, kx] += acc


@njit(cache=True)
def maxpool2_fwd(x, out, idx):
    """2x2/stride-2 max pooling; idx records the in-window argmax (0..3),
    first occurrence on ties so the backward pass routes each gradient to
    exactly one input."""
    B, C, H, W = x.shape
    for bi in range(B):
        for c in range(C):
            for y in range(H // 2):
                for xx in range(W // 2):
                    best = x[bi, c, 2 * y, 2 * xx]
                    k = 0
                    v = x[bi, c, 2 * y, 2 * xx + 1]
                    if v > best:
                        best = v
                        k = 1
                    v = x[bi, c, 2 * y + 1, 2 * xx]
                    if v > best:
                        best = v
                        k = 2
                    v = x[bi, c, 2 * y + 1, 2 * xx + 1]
                    if v > best:
                        best = v
                        k = 3
                    out[bi, c, y, xx] = best
                    idx[bi, c, y, xx] = k


@njit(cache=True)
def maxpool2_bwd(dout, idx, dx):
    """Scatter gradients to the recorded argmax; every dx slot is written,
    so dx may be uninitialized."""
    B, C, H2, W2 = dout.shape
    for bi in range(B):
        for c in range(C):
            for y in range(H2):
                for xx in range(W2):
                    dx[bi, c, 2 * y, 2 * xx] = 0.0
                    dx[bi, c, 2 * y, 2 * xx + 1] = 0.0
                    dx[bi, c, 2 * y + 1, 2 * xx] = 0.0
                    dx[bi, c, 2 * y + 1, 2 * xx + 1] = 0.0
                    k = idx[bi, c, y, xx]
                    dx[bi, c, 2 * y + k // 2, 2 * xx + k % 2] = dout[bi, c, y, xx]
