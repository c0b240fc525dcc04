"""Reference implementations used as test oracles.

Two tiers, both independent of the optimized kernels:

* ``naive_*``: scalar Python loops straight from the defining sums, float64
  accumulation. They optionally count every multiply-accumulate they perform
  (padding taps included, since they still cost a MAC) so layer MAC formulas
  can be checked by brute force. Only practical on small inputs.
* ``direct_*``: float64 numpy versions that explicitly zero-pad the input and
  sum kernel taps one by one. Fast enough to run full 224x224 networks.

All functions take and return float64 ndarrays in (n, c, h, w) layout.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np


class MacCounter:
    def __init__(self):
        self.count = 0

    def add(self, k: int = 1):
        self.count += k


def _out_dim(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def naive_conv2d(x, weight, bias=None, stride=1, pad=0, counter: Optional[MacCounter] = None):
    n, c_in, h, w = x.shape
    c_out, _, k, _ = weight.shape
    ho, wo = _out_dim(h, k, stride, pad), _out_dim(w, k, stride, pad)
    xl, wl = x.tolist(), weight.tolist()
    bl = [0.0] * c_out if bias is None else [float(b) for b in bias]
    out = np.zeros((n, c_out, ho, wo))
    macs = 0
    for b in range(n):
        for o in range(c_out):
            for y in range(ho):
                for xx in range(wo):
                    acc = bl[o]
                    for i in range(c_in):
                        for dy in range(k):
                            iy = y * stride - pad + dy
                            for dx in range(k):
                                ix = xx * stride - pad + dx
                                v = xl[b][i][iy][ix] if 0 <= iy < h and 0 <= ix < w else 0.0
                                acc += v * wl[o][i][dy][dx]
                                macs += 1
                    out[b, o, y, xx] = acc
    if counter is not None:
        counter.add(macs)
    return out


def naive_depthwise_conv2d(x, weight, bias=None, stride=1, pad=0, counter: Optional[MacCounter] = None):
    n, c, h, w = x.shape
    k = weight.shape[2]
    ho, wo = _out_dim(h, k, stride, pad), _out_dim(w, k, stride, pad)
    xl, wl = x.tolist(), weight.tolist()
    out = np.zeros((n, c, ho, wo))
    macs = 0
    for b in range(n):
        for ch in range(c):
            for y in range(ho):
                for xx in range(wo):
                    acc = 0.0 if bias is None else float(bias[ch])
                    for dy in range(k):
                        iy = y * stride - pad + dy
                        for dx in range(k):
                            ix = xx * stride - pad + dx
                            v = xl[b][ch][iy][ix] if 0 <= iy < h and 0 <= ix < w else 0.0
                            acc += v * wl[ch][0][dy][dx]
                            macs += 1
                    out[b, ch, y, xx] = acc
    if counter is not None:
        counter.add(macs)
    return out


def naive_batch_norm(x, gamma, beta, mean, var, eps):
    out = np.empty(x.shape)
    n, c, h, w = x.shape
    for b in range(n):
        for ch in range(c):
            denom = math.sqrt(float(var[ch]) + eps)
            for y in range(h):
                for xx in range(w):
                    out[b, ch, y, xx] = float(gamma[ch]) * (float(x[b, ch, y, xx]) - float(mean[ch])) / denom + float(beta[ch])
    return out


def naive_relu(x):
    return np.array([v if v > 0 else 0.0 for v in np.asarray(x, dtype=np.float64).reshape(-1)]).reshape(x.shape)


def naive_global_avg_pool(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, 1, 1))
    for b in range(n):
        for ch in range(c):
            total = 0.0
            for v in np.asarray(x[b, ch], dtype=np.float64).reshape(-1):
                total += v
            out[b, ch, 0, 0] = total / (h * w)
    return out


def naive_fully_connected(x, weight, bias=None, counter: Optional[MacCounter] = None):
    n = x.shape[0]
    flat = np.asarray(x, dtype=np.float64).reshape(n, -1).tolist()
    wl = np.asarray(weight, dtype=np.float64).tolist()
    c_out = len(wl)
    out = np.zeros((n, c_out, 1, 1))
    macs = 0
    for b in range(n):
        for o in range(c_out):
            acc = 0.0 if bias is None else float(bias[o])
            for i, v in enumerate(flat[b]):
                acc += v * wl[o][i]
                macs += 1
            out[b, o, 0, 0] = acc
    if counter is not None:
        counter.add(macs)
    return out


def naive_softmax(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h, w))
    for b in range(n):
        for y in range(h):
            for xx in range(w):
                logits = [float(x[b, ch, y, xx]) for ch in range(c)]
                m = max(logits)
                exps = [math.exp(v - m) for v in logits]
                s = math.fsum(exps)
                for ch in range(c):
                    out[b, ch, y, xx] = exps[ch] / s
    return out


# -- vectorized float64 oracles ---------------------------------------------


def _pad(x, pad):
    if pad == 0:
        return np.asarray(x, dtype=np.float64)
    return np.pad(np.asarray(x, dtype=np.float64), ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def direct_conv2d(x, weight, bias=None, stride=1, pad=0):
    n, _, h, w = x.shape
    c_out, _, k, _ = weight.shape
    ho, wo = _out_dim(h, k, stride, pad), _out_dim(w, k, stride, pad)
    xp = _pad(x, pad)
    wt = np.asarray(weight, dtype=np.float64)
    out = np.zeros((n, c_out, ho, wo))
    for dy in range(k):
        for dx in range(k):
            window = xp[:, :, dy : dy + stride * (ho - 1) + 1 : stride, dx : dx + stride * (wo - 1) + 1 : stride]
            out += np.einsum("oi,nihw->nohw", wt[:, :, dy, dx], window)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)[None, :, None, None]
    return out


def direct_depthwise_conv2d(x, weight, bias=None, stride=1, pad=0):
    n, c, h, w = x.shape
    k = weight.shape[2]
    ho, wo = _out_dim(h, k, stride, pad), _out_dim(w, k, stride, pad)
    xp = _pad(x, pad)
    wt = np.asarray(weight, dtype=np.float64)
    out = np.zeros((n, c, ho, wo))
    for dy in range(k):
        for dx in range(k):
            window = xp[:, :, dy : dy + stride * (ho - 1) + 1 : stride, dx : dx + stride * (wo - 1) + 1 : stride]
            out += window * wt[None, :, 0, dy, dx, None, None]
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)[None, :, None, None]
    return out


def direct_batch_norm(x, gamma, beta, mean, var, eps):
    col = lambda v: np.asarray(v, dtype=np.float64)[None, :, None, None]  # noqa: E731
    return col(gamma) * (np.asarray(x, dtype=np.float64) - col(mean)) / np.sqrt(col(var) + eps) + col(beta)


def direct_relu(x):
    return np.where(x > 0, np.asarray(x, dtype=np.float64), 0.0)


def direct_global_avg_pool(x):
    n, c = x.shape[:2]
    return np.asarray(x, dtype=np.float64).reshape(n, c, -1).sum(axis=2).reshape(n, c, 1, 1) / (x.shape[2] * x.shape[3])


def direct_fully_connected(x, weight, bias=None):
    n = x.shape[0]
    out = np.asarray(x, dtype=np.float64).reshape(n, -1) @ np.asarray(weight, dtype=np.float64).T
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)
    return out.reshape(n, -1, 1, 1)


def direct_softmax(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)
