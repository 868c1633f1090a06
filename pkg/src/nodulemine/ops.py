"""Deterministic tensor kernels with explicit forward and backward passes.

Tensors are plain numpy float64 arrays in NCHW layout (batch, channels,
height, width); a "vector" is a 1-D float64 array. Every operation here is
a pure function of its inputs, and every differentiable one has a matching
``*_backward`` returning exact partial derivatives weighted by the upstream
gradient. Convolution is cross-correlation (kernels are learned, so the
flip would be meaningless); the hot conv kernels are dispatched to the
backend selected in :mod:`nodulemine.kernels`.
"""

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Raised when tensor shapes violate an operation's contract."""


def _as_tensor4(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(f"{name} must be 4-D (N, C, H, W), got shape {x.shape}")
    return np.ascontiguousarray(x)


def conv_output_size(size, k, stride, padding):
    return (size + 2 * padding - k) // stride + 1


def conv2d(x, weights, bias, stride=1, padding=0):
    """2-D cross-correlation plus per-channel bias.

    x:       (N, C_in, H, W)
    weights: (C_out, C_in, KH, KW), KH and KW odd
    bias:    (C_out,)
    Output spatial dims: floor((H + 2*padding - K) / stride) + 1.
    """
    x = _as_tensor4(x, "input")
    weights = _as_tensor4(weights, "weights")
    bias = np.ascontiguousarray(np.asarray(bias, dtype=np.float64))
    kh, kw = weights.shape[2], weights.shape[3]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"kernel spatial dims must be odd, got {kh}x{kw}")
    if weights.shape[1] != x.shape[1]:
        raise ShapeError(
            f"input has {x.shape[1]} channels but weights expect {weights.shape[1]}"
        )
    if bias.ndim != 1 or bias.shape[0] != weights.shape[0]:
        raise ShapeError(
            f"bias must have shape ({weights.shape[0]},), got {bias.shape}"
        )
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"padding must be >= 0, got {padding}")
    if x.shape[2] + 2 * padding < kh or x.shape[3] + 2 * padding < kw:
        raise ShapeError(
            f"padded input {x.shape[2] + 2 * padding}x{x.shape[3] + 2 * padding} "
            f"smaller than kernel {kh}x{kw}"
        )
    if padding > 0:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    return kernels.conv2d_forward(x, weights, bias, stride)


def conv2d_backward(x, weights, upstream, stride=1, padding=0):
    """Gradients of conv2d w.r.t. input, weights and bias.

    upstream must have the conv2d output shape. Returns
    (grad_input, grad_weights, grad_bias).
    """
    x = _as_tensor4(x, "input")
    weights = _as_tensor4(weights, "weights")
    upstream = _as_tensor4(upstream, "upstream")
    kh, kw = weights.shape[2], weights.shape[3]
    ho = conv_output_size(x.shape[2], kh, stride, padding)
    wo = conv_output_size(x.shape[3], kw, stride, padding)
    expected = (x.shape[0], weights.shape[0], ho, wo)
    if upstream.shape != expected:
        raise ShapeError(f"upstream shape {upstream.shape} != conv output {expected}")
    if weights.shape[1] != x.shape[1]:
        raise ShapeError(
            f"input has {x.shape[1]} channels but weights expect {weights.shape[1]}"
        )
    x_pad = x
    if padding > 0:
        x_pad = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    gx_pad, gk, gb = kernels.conv2d_backward(x_pad, weights, upstream, stride)
    if padding > 0:
        gx = gx_pad[:, :, padding:-padding, padding:-padding]
    else:
        gx = gx_pad
    return np.ascontiguousarray(gx), gk, gb


def pool2d(x, window, mode):
    """Non-overlapping window pooling.

    Spatial dims must divide evenly by ``window`` (no implicit padding).
    mode 'max' returns (output, argmax) where argmax holds each window's
    winning flat index (row-major within the window, first maximum wins);
    mode 'mean' returns (output, None).
    """
    x = _as_tensor4(x, "input")
    if mode not in ("max", "mean"):
        raise ValueError(f"mode must be 'max' or 'mean', got {mode!r}")
    if window < 1:
        raise ShapeError(f"window must be >= 1, got {window}")
    n, c, h, w = x.shape
    if h % window or w % window:
        raise ShapeError(
            f"spatial dims {h}x{w} not divisible by window {window}"
        )
    hw, ww = h // window, w // window
    blocks = x.reshape(n, c, hw, window, ww, window)
    if mode == "mean":
        return blocks.mean(axis=(3, 5)), None
    flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, hw, ww, window * window)
    argmax = flat.argmax(axis=4)
    out = np.take_along_axis(flat, argmax[..., None], axis=4)[..., 0]
    return out, argmax


def pool2d_backward(upstream, input_shape, window, mode, argmax=None):
    """Route pooled gradients back to the input grid.

    max: upstream lands on each window's recorded argmax site;
    mean: upstream is spread uniformly over the window.
    """
    upstream = _as_tensor4(upstream, "upstream")
    n, c, h, w = input_shape
    hw, ww = h // window, w // window
    if upstream.shape != (n, c, hw, ww):
        raise ShapeError(
            f"upstream shape {upstream.shape} != pooled shape {(n, c, hw, ww)}"
        )
    if mode == "mean":
        g = np.repeat(np.repeat(upstream, window, axis=2), window, axis=3)
        return g / float(window * window)
    if argmax is None:
        raise ValueError("max-pool backward requires the recorded argmax")
    flat = np.zeros((n, c, hw, ww, window * window), dtype=np.float64)
    np.put_along_axis(flat, argmax[..., None], upstream[..., None], axis=4)
    blocks = flat.reshape(n, c, hw, ww, window, window).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(blocks.reshape(n, c, h, w))


def upsample2d(x, factor):
    """Nearest-neighbor expansion by an integer factor >= 2."""
    x = _as_tensor4(x, "input")
    if factor < 2:
        raise ShapeError(f"upsample factor must be >= 2, got {factor}")
    return np.repeat(np.repeat(x, factor, axis=2), factor, axis=3)


def upsample2d_backward(upstream, factor):
    """Sum upstream gradients over each replicated block."""
    upstream = _as_tensor4(upstream, "upstream")
    n, c, h, w = upstream.shape
    if h % factor or w % factor:
        raise ShapeError(
            f"upstream dims {h}x{w} not divisible by factor {factor}"
        )
    return upstream.reshape(n, c, h // factor, factor, w // factor, factor).sum(axis=(3, 5))


def activation(x, kind):
    """Elementwise nonlinearity: relu max(0,x) or numerically stable sigmoid."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    raise ValueError(f"kind must be 'relu' or 'sigmoid', got {kind!r}")


def activation_backward(x, kind, upstream):
    """Elementwise derivative at ``x`` times upstream."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != x.shape:
        raise ShapeError(f"upstream shape {upstream.shape} != input shape {x.shape}")
    if kind == "relu":
        return upstream * (x > 0)
    if kind == "sigmoid":
        s = activation(x, "sigmoid")
        return upstream * s * (1.0 - s)
    raise ValueError(f"kind must be 'relu' or 'sigmoid', got {kind!r}")


def channel_concat(a, b):
    """Stack two tensors along the channel axis, ``a`` first."""
    a = _as_tensor4(a, "a")
    b = _as_tensor4(b, "b")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(
            f"batch/spatial dims differ: {a.shape} vs {b.shape}"
        )
    return np.concatenate([a, b], axis=1)


def channel_concat_backward(upstream, channels_a):
    """Split the upstream gradient back into the two concatenated sources."""
    upstream = _as_tensor4(upstream, "upstream")
    if not 0 <= channels_a <= upstream.shape[1]:
        raise ShapeError(
            f"channels_a={channels_a} out of range for {upstream.shape[1]} channels"
        )
    return upstream[:, :channels_a], upstream[:, channels_a:]


def mean_pool3_same(x):
    """3x3 stride-1 mean pool with zero padding (spatial dims preserved).

    Used by the pooling branch of inception blocks. The divisor is always 9,
    border windows included, which makes the operator self-adjoint.
    """
    x = _as_tensor4(x, "input")
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros_like(x)
    h, w = x.shape[2], x.shape[3]
    for i in range(3):
        for j in range(3):
            out += xp[:, :, i : i + h, j : j + w]
    return out / 9.0


def mean_pool3_same_backward(upstream):
    """Adjoint of mean_pool3_same (the same averaging applied to upstream)."""
    return mean_pool3_same(upstream)
