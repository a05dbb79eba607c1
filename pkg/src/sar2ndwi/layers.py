"""Forward and backward passes for the network's building blocks.

Layout is channel-last (B, H, W, C) throughout. Convolutions are
stride-1 with same padding and run as one matrix product over im2col
patches; backward passes recompute the patch matrix instead of caching
it, trading a second im2col for a much smaller activation footprint.
All ops preserve the input dtype so the same code runs the float32
training path and the float64 gradient checks.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _im2col(padded: np.ndarray, kh: int, kw: int, out_h: int, out_w: int) -> np.ndarray:
    """Stride-1 sliding windows as a (B*out_h*out_w, kh*kw*C) matrix."""
    b, _, _, c = padded.shape
    s0, s1, s2, s3 = padded.strides
    windows = as_strided(
        padded,
        shape=(b, out_h, out_w, kh, kw, c),
        strides=(s0, s1, s2, s1, s2, s3),
    )
    return windows.reshape(b * out_h * out_w, kh * kw * c)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 convolution; w has shape (kh, kw, c_in, c_out)."""
    batch, h, width, _ = x.shape
    kh, kw, _, c_out = w.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    cols = _im2col(padded, kh, kw, h, width)
    y = cols @ w.reshape(-1, c_out) + b
    return y.reshape(batch, h, width, c_out)


def conv2d_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients of conv2d: returns (dx, dw, db)."""
    batch, h, width, c_in = x.shape
    kh, kw, _, c_out = w.shape
    ph, pw = kh // 2, kw // 2

    dy_flat = dy.reshape(-1, c_out)
    db = dy.sum(axis=(0, 1, 2))

    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    cols = _im2col(padded, kh, kw, h, width)
    dw = (cols.T @ dy_flat).reshape(kh, kw, c_in, c_out)

    dcols = dy_flat @ w.reshape(-1, c_out).T
    dcols = dcols.reshape(batch, h, width, kh, kw, c_in)
    dpadded = np.zeros_like(padded)
    for i in range(kh):
        for j in range(kw):
            dpadded[:, i : i + h, j : j + width, :] += dcols[:, :, :, i, j, :]
    dx = dpadded[:, ph : ph + h, pw : pw + width, :]
    return dx, dw, db


def maxpool2x2(x: np.ndarray):
    """2x2 stride-2 max pooling; returns (y, argmax) with ties going to the
    first candidate so the backward pass routes each gradient exactly once."""
    batch, h, width, c = x.shape
    grouped = (
        x.reshape(batch, h // 2, 2, width // 2, 2, c)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(batch, h // 2, width // 2, c, 4)
    )
    idx = grouped.argmax(axis=4)
    y = np.take_along_axis(grouped, idx[..., np.newaxis], axis=4)[..., 0]
    return y, idx


def maxpool2x2_backward(dy: np.ndarray, idx: np.ndarray) -> np.ndarray:
    batch, h2, w2, c = dy.shape
    dgrouped = np.zeros((batch, h2, w2, c, 4), dtype=dy.dtype)
    np.put_along_axis(dgrouped, idx[..., np.newaxis], dy[..., np.newaxis], axis=4)
    return (
        dgrouped.reshape(batch, h2, w2, c, 2, 2)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(batch, h2 * 2, w2 * 2, c)
    )


def conv_transpose2x2(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """2x2 stride-2 transposed convolution (exact 2x upsampling).

    w has shape (2, 2, c_in, c_out). Kernel and stride match, so output
    blocks do not overlap and the op is a single matrix product per pixel.
    """
    batch, h, width, c_in = x.shape
    c_out = w.shape[3]
    w_mat = w.transpose(2, 0, 1, 3).reshape(c_in, 4 * c_out)
    y = (x.reshape(-1, c_in) @ w_mat).reshape(batch, h, width, 2, 2, c_out)
    y = y.transpose(0, 1, 3, 2, 4, 5).reshape(batch, 2 * h, 2 * width, c_out)
    return y + b


def conv_transpose2x2_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients of conv_transpose2x2: returns (dx, dw, db)."""
    batch, h, width, c_in = x.shape
    c_out = w.shape[3]
    db = dy.sum(axis=(0, 1, 2))
    dy_mat = (
        dy.reshape(batch, h, 2, width, 2, c_out)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(-1, 4 * c_out)
    )
    x_mat = x.reshape(-1, c_in)
    dw = (x_mat.T @ dy_mat).reshape(c_in, 2, 2, c_out).transpose(1, 2, 0, 3)
    w_mat = w.transpose(2, 0, 1, 3).reshape(c_in, 4 * c_out)
    dx = (dy_mat @ w_mat.T).reshape(batch, h, width, c_in)
    return dx, dw, db


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dy: np.ndarray, pre: np.ndarray) -> np.ndarray:
    return dy * (pre > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dy * y * (1.0 - y)
