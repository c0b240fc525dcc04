"""Optimized float32 kernels.

The ``*_into`` functions work on raw (n, c, h, w) ndarrays and write into a
caller-owned output array; the engine uses them with preallocated ping-pong
buffers. The Tensor-level wrappers below allocate a fresh output.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..tensor import Shape, ShapeError, Tensor, conv_output_dim
from .types import BnParams, ConvWeights


def tap_range(out_len: int, in_len: int, stride: int, pad: int, offset: int) -> tuple[int, int, int]:
    """Output span [o0, o1) whose input coordinate o*stride - pad + offset is in bounds.

    Returns (o0, o1, i0) where i0 is the input coordinate read by o0. Taps
    that fall in the zero padding are skipped, which is the same as adding 0.
    """
    lo = pad - offset
    o0 = max(0, -(-lo // stride))
    o1 = min(out_len, (in_len - 1 + lo) // stride + 1)
    if o1 <= o0:
        return 0, 0, 0
    return o0, o1, o0 * stride - lo


def conv_out_hw(h: int, w: int, k: int, stride: int, pad: int) -> tuple[int, int]:
    try:
        return conv_output_dim(h, k, stride, pad), conv_output_dim(w, k, stride, pad)
    except ValueError as e:
        raise ShapeError(f"non-positive output dims: {e}") from None


def im2col(x: np.ndarray, k: int, stride: int, pad: int, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Gather patches of a (c, h, w) plane stack into a (c*k*k, ho*wo) matrix."""
    c, h, w = x.shape
    ho, wo = conv_out_hw(h, w, k, stride, pad)
    if out is None:
        out = np.empty((c * k * k, ho * wo), dtype=np.float32)
    else:
        out = out[: c * k * k * ho * wo].reshape(c * k * k, ho * wo)
    cols = out.reshape(c, k, k, ho, wo)
    if pad:
        cols.fill(0.0)
    for dy in range(k):
        y0, y1, iy = tap_range(ho, h, stride, pad, dy)
        for dx in range(k):
            x0, x1, ix = tap_range(wo, w, stride, pad, dx)
            if y1 == y0 or x1 == x0:
                continue
            cols[:, dy, dx, y0:y1, x0:x1] = x[
                :, iy : iy + (y1 - y0 - 1) * stride + 1 : stride, ix : ix + (x1 - x0 - 1) * stride + 1 : stride
            ]
    return out


def conv2d_into(x, weight, bias, stride, pad, out, scratch=None):
    n, c_in, h, w = x.shape
    c_out, wc_in, k, _ = weight.shape
    if c_in != wc_in:
        raise ShapeError(f"input has {c_in} channels, weights expect {wc_in}")
    ho, wo = conv_out_hw(h, w, k, stride, pad)
    if out.shape != (n, c_out, ho, wo):
        raise ShapeError(f"output buffer shape {out.shape} != {(n, c_out, ho, wo)}")
    w2 = weight.reshape(c_out, c_in * k * k)
    for i in range(n):
        dst = out[i].reshape(c_out, ho * wo)
        if k == 1 and stride == 1 and pad == 0:
            np.matmul(w2, x[i].reshape(c_in, h * w), out=dst)
        else:
            cols = im2col(x[i], k, stride, pad, out=scratch)
            np.matmul(w2, cols, out=dst)
        if bias is not None:
            dst += bias[:, None]
    return out


def depthwise_scratch_floats(c: int, h: int, w: int, k: int, stride: int, pad: int) -> int:
    ho, wo = conv_out_hw(h, w, k, stride, pad)
    padded = c * (h + 2 * pad) * (w + 2 * pad) if pad else 0
    return padded + c * k * k * ho * wo


def depthwise_conv2d_into(x, weight, bias, stride, pad, out, scratch=None):
    """Per-channel filtering as one batched (1 x k*k) @ (k*k x pixels) product per channel.

    ``scratch`` must hold ``depthwise_scratch_floats`` floats: the zero-padded
    input planes followed by the gathered taps.
    """
    n, c, h, w = x.shape
    wc, one, k, _ = weight.shape
    if wc != c or one != 1:
        raise ShapeError(f"depthwise weights {weight.shape} do not match {c} input channels")
    ho, wo = conv_out_hw(h, w, k, stride, pad)
    if out.shape != (n, c, ho, wo):
        raise ShapeError(f"output buffer shape {out.shape} != {(n, c, ho, wo)}")
    hp, wp = h + 2 * pad, w + 2 * pad
    need = depthwise_scratch_floats(c, h, w, k, stride, pad)
    if scratch is None:
        scratch = np.empty(need, dtype=np.float32)
    padded = c * hp * wp if pad else 0
    cols = scratch[padded:need].reshape(c, k * k, ho, wo)
    taps = weight.reshape(c, 1, k * k)
    for i in range(n):
        if pad:
            xp = scratch[:padded].reshape(c, hp, wp)
            xp[:, :pad] = 0.0
            xp[:, -pad:] = 0.0
            xp[:, :, :pad] = 0.0
            xp[:, :, -pad:] = 0.0
            xp[:, pad : pad + h, pad : pad + w] = x[i]
        else:
            xp = x[i]
        for dy in range(k):
            for dx in range(k):
                cols[:, dy * k + dx] = xp[:, dy : dy + stride * (ho - 1) + 1 : stride, dx : dx + stride * (wo - 1) + 1 : stride]
        np.matmul(taps, cols.reshape(c, k * k, ho * wo), out=out[i].reshape(c, 1, ho * wo))
        if bias is not None:
            out[i] += bias[:, None, None]
    return out


def batch_norm_into(x, scale, shift, out):
    c = x.shape[1]
    if scale.shape != (c,) or shift.shape != (c,):
        raise ShapeError(f"BN parameters of length {scale.size} do not match {c} channels")
    np.multiply(x, scale.astype(np.float32)[None, :, None, None], out=out)
    out += shift.astype(np.float32)[None, :, None, None]
    return out


def relu_into(x, out):
    return np.maximum(x, 0.0, out=out)


def global_avg_pool_into(x, out):
    n, c, h, w = x.shape
    if out.shape != (n, c, 1, 1):
        raise ShapeError(f"output buffer shape {out.shape} != {(n, c, 1, 1)}")
    np.mean(x.reshape(n, c, h * w), axis=2, out=out.reshape(n, c))
    return out


def fully_connected_into(x, weight, bias, out):
    n = x.shape[0]
    features = x[0].size
    c_out, c_in = weight.shape
    if features != c_in:
        raise ShapeError(f"fc expects {c_in} input features, got {features}")
    if out.shape != (n, c_out, 1, 1):
        raise ShapeError(f"output buffer shape {out.shape} != {(n, c_out, 1, 1)}")
    dst = out.reshape(n, c_out)
    np.matmul(x.reshape(n, c_in), weight.T, out=dst)
    if bias is not None:
        dst += bias[None, :]
    return out


def softmax_into(x, out):
    np.subtract(x, x.max(axis=1, keepdims=True), out=out)
    np.exp(out, out=out)
    out /= out.sum(axis=1, keepdims=True)
    return out


# -- Tensor-level API --------------------------------------------------------


def _out(shape) -> np.ndarray:
    return np.empty(shape, dtype=np.float32)


def conv2d(input: Tensor, w: ConvWeights, stride: int = 1, pad: int = 0) -> Tensor:
    x = input.numpy()
    n, _, h, wd = x.shape
    if x.shape[1] != w.c_in:
        raise ShapeError(f"input has {x.shape[1]} channels, weights expect {w.c_in}")
    ho, wo = conv_out_hw(h, wd, w.k, stride, pad)
    return Tensor(conv2d_into(x, w.weight, w.bias, stride, pad, _out((n, w.c_out, ho, wo))))


def depthwise_conv2d(input: Tensor, w: ConvWeights, stride: int = 1, pad: int = 0) -> Tensor:
    x = input.numpy()
    n, c, h, wd = x.shape
    if w.c_out != c or w.c_in != 1:
        raise ShapeError(f"depthwise weights {w.weight.shape} do not match {c} input channels")
    ho, wo = conv_out_hw(h, wd, w.k, stride, pad)
    return Tensor(depthwise_conv2d_into(x, w.weight, w.bias, stride, pad, _out((n, c, ho, wo))))


def pointwise_conv2d(input: Tensor, w: ConvWeights) -> Tensor:
    if w.k != 1:
        raise ShapeError(f"pointwise conv needs a 1x1 kernel, got {w.k}x{w.k}")
    return conv2d(input, w, stride=1, pad=0)


def batch_norm(input: Tensor, p: BnParams) -> Tensor:
    x = input.numpy()
    if p.channels != x.shape[1]:
        raise ShapeError(f"BN has {p.channels} channels, input has {x.shape[1]}")
    scale, shift = p.scale_shift()
    return Tensor(batch_norm_into(x, scale, shift, _out(x.shape)))


def fold_bn_into_conv(w: ConvWeights, p: BnParams) -> ConvWeights:
    """Absorb a following batch norm into the conv so that conv(x, w') == bn(conv(x, w))."""
    if p.channels != w.c_out:
        raise ShapeError(f"BN has {p.channels} channels, conv produces {w.c_out}")
    scale, shift = p.scale_shift()
    weight = w.weight.astype(np.float64) * scale[:, None, None, None]
    bias = w.bias_or_zeros().astype(np.float64) * scale + shift
    return ConvWeights(weight.astype(np.float32), bias.astype(np.float32))


def relu(input: Tensor) -> Tensor:
    x = input.numpy()
    return Tensor(relu_into(x, _out(x.shape)))


def global_avg_pool(input: Tensor) -> Tensor:
    x = input.numpy()
    return Tensor(global_avg_pool_into(x, _out((x.shape[0], x.shape[1], 1, 1))))


def fully_connected(input: Tensor, weights: np.ndarray, bias: Optional[np.ndarray] = None) -> Tensor:
    x = input.numpy()
    weights = np.asarray(weights, dtype=np.float32)
    if weights.ndim != 2:
        raise ShapeError(f"fc weights must be (out, in), got shape {weights.shape}")
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float32).reshape(-1)
        if bias.size != weights.shape[0]:
            raise ShapeError(f"fc bias length {bias.size} != {weights.shape[0]} outputs")
    return Tensor(fully_connected_into(x, weights, bias, _out((x.shape[0], weights.shape[0], 1, 1))))


def softmax(input: Tensor) -> Tensor:
    x = input.numpy()
    return Tensor(softmax_into(x, _out(x.shape)))


def output_shape(input: Shape, w: ConvWeights, stride: int, pad: int) -> Shape:
    ho, wo = conv_out_hw(input.h, input.w, w.k, stride, pad)
    return Shape(input.n, w.c_out, ho, wo)
