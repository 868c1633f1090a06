"""Numpy implementation of the convolution kernels.

This is the fallback backend; a compiled Cython extension with the same
call signatures lives in ``_convcore.pyx``. Both operate on pre-padded
inputs in NCHW layout with float64 data. Padding and argument validation
happen one level up, in :mod:`nodulemine.ops`.

The forward pass is cross-correlation (no kernel flip), implemented as
sliding windows + tensordot so the heavy lifting lands in BLAS.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x_pad, kernels, bias, stride):
    """Cross-correlate padded input with kernels.

    x_pad:   (N, C_in, H_pad, W_pad) float64
    kernels: (C_out, C_in, KH, KW) float64
    bias:    (C_out,) float64
    returns: (N, C_out, H_out, W_out)
    """
    kh, kw = kernels.shape[2], kernels.shape[3]
    win = sliding_window_view(x_pad, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride, :, :]
    # (N, C_in, Ho, Wo, KH, KW) x (C_out, C_in, KH, KW) -> (N, Ho, Wo, C_out)
    out = np.tensordot(win, kernels, axes=([1, 4, 5], [1, 2, 3]))
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    out += bias[None, :, None, None]
    return out


def conv2d_backward(x_pad, kernels, upstream, stride):
    """Gradients of conv2d_forward w.r.t. padded input, kernels and bias.

    upstream: (N, C_out, H_out, W_out)
    returns (gx_pad, gk, gb) with gx_pad shaped like x_pad.
    """
    kh, kw = kernels.shape[2], kernels.shape[3]
    ho, wo = upstream.shape[2], upstream.shape[3]

    win = sliding_window_view(x_pad, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride, :, :]
    # (N, C_out, Ho, Wo) x (N, C_in, Ho, Wo, KH, KW) -> (C_out, C_in, KH, KW)
    gk = np.tensordot(upstream, win, axes=([0, 2, 3], [0, 2, 3]))
    gb = upstream.sum(axis=(0, 2, 3))

    gx_pad = np.zeros_like(x_pad)
    for i in range(kh):
        for j in range(kw):
            # (N, C_out, Ho, Wo) x (C_out, C_in) -> (N, C_in, Ho, Wo)
            contrib = np.tensordot(upstream, kernels[:, :, i, j], axes=([1], [0]))
            contrib = contrib.transpose(0, 3, 1, 2)
            gx_pad[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += contrib
    return gx_pad, gk, gb
