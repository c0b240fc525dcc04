"""Evaluation preprocessing (short-side resize, center crop) and image decoding."""
from __future__ import annotations

import math
import re
from typing import Optional, Sequence

import numpy as np

from ..tensor import FDT1_MAGIC, Tensor, read_tensor_file


class ImageFormatError(ValueError):
    pass


def resized_hw(h: int, w: int, short_side: int) -> tuple[int, int]:
    """Size after scaling the shorter edge to ``short_side``; the long edge rounds half up."""
    if h <= w:
        return short_side, max(1, math.floor(w * short_side / h + 0.5))
    return max(1, math.floor(h * short_side / w + 0.5)), short_side


def _bilinear_axis(in_len: int, out_len: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centers: output pixel d samples input coordinate (d + 0.5) * in/out - 0.5
    src = (np.arange(out_len, dtype=np.float64) + 0.5) * (in_len / out_len) - 0.5
    src = np.clip(src, 0.0, in_len - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, in_len - 1)
    return i0, i1, src - i0


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize the last two axes of ``x``."""
    h, w = x.shape[-2:]
    x = np.asarray(x, dtype=np.float64)
    y0, y1, fy = _bilinear_axis(h, out_h)
    rows = x[..., y0, :] * (1.0 - fy)[:, None] + x[..., y1, :] * fy[:, None]
    x0, x1, fx = _bilinear_axis(w, out_w)
    return rows[..., x0] * (1.0 - fx) + rows[..., x1] * fx


def preprocess(
    image: Tensor,
    short_side: int = 256,
    crop: int = 224,
    max_value: float = 255.0,
    mean: Optional[Sequence[float]] = None,
    std: Optional[Sequence[float]] = None,
) -> Tensor:
    """Resize so the shorter edge is ``short_side``, take the center crop, scale to [0, 1].

    ``image`` holds raw intensities in [0, max_value]. ``mean``/``std`` apply an
    optional per-channel normalization after scaling.
    """
    n, c, h, w = image.shape
    if h < 1 or w < 1:
        raise ImageFormatError(f"degenerate image {h}x{w}")
    if crop > short_side:
        raise ValueError(f"crop {crop} is larger than the resized short side {short_side}")
    rh, rw = resized_hw(h, w, short_side)
    x = image.numpy()
    if (rh, rw) != (h, w):
        x = resize_bilinear(x, rh, rw)
    top, left = (rh - crop) // 2, (rw - crop) // 2
    out = np.asarray(x[:, :, top : top + crop, left : left + crop], dtype=np.float64) / max_value
    if mean is not None:
        out = out - np.asarray(mean, dtype=np.float64).reshape(1, -1, 1, 1)
    if std is not None:
        out = out / np.asarray(std, dtype=np.float64).reshape(1, -1, 1, 1)
    return Tensor(out.astype(np.float32))


_PPM_HEADER = re.compile(rb"P6(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def read_ppm(payload: bytes) -> Tensor:
    """Decode a binary PPM (P6, maxval 255) into a 1x3xHxW tensor of raw 0..255 values."""
    m = _PPM_HEADER.match(payload)
    if m is None:
        raise ImageFormatError("not a binary PPM (P6) image")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    if w < 1 or h < 1:
        raise ImageFormatError(f"degenerate image {w}x{h}")
    body = payload[m.end() :]
    if len(body) < 3 * w * h:
        raise ImageFormatError(f"truncated PPM: need {3 * w * h} pixel bytes, have {len(body)}")
    rgb = np.frombuffer(body, dtype=np.uint8, count=3 * w * h).reshape(h, w, 3)
    return Tensor(rgb.transpose(2, 0, 1)[None].astype(np.float32))


def write_ppm(rgb: np.ndarray) -> bytes:
    """Encode an (h, w, 3) uint8 array as binary PPM."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes()


def load_image(payload: bytes) -> Tensor:
    """Decode PPM or FDT1 bytes, sniffing the magic."""
    if payload[:2] == b"P6":
        return read_ppm(payload)
    if payload[:4] == FDT1_MAGIC:
        return read_tensor_file(payload)
    raise ImageFormatError("unrecognized image format (expected P6 PPM or FDT1 tensor)")
