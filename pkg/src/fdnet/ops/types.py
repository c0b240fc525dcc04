from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..tensor import ShapeError

DEFAULT_BN_EPS = 1e-5


@dataclass(frozen=True, eq=False)
class ConvWeights:
    """Square conv filter bank of shape (c_out, c_in, k, k); depthwise uses c_in == 1."""

    weight: np.ndarray
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float32, order="C")
        if w.ndim != 4:
            raise ShapeError(f"conv weight must be 4-D, got shape {w.shape}")
        c_out, _, kh, kw = w.shape
        if kh != kw:
            raise ShapeError(f"kernel must be square, got {kh}x{kw}")
        if kh < 1 or kh % 2 == 0:
            raise ShapeError(f"kernel size must be odd and >= 1, got {kh}")
        w.flags.writeable = False
        object.__setattr__(self, "weight", w)
        if self.bias is not None:
            b = np.array(self.bias, dtype=np.float32).reshape(-1)
            if b.shape != (c_out,):
                raise ShapeError(f"bias length {b.size} != c_out {c_out}")
            b.flags.writeable = False
            object.__setattr__(self, "bias", b)

    @property
    def c_out(self) -> int:
        return self.weight.shape[0]

    @property
    def c_in(self) -> int:
        return self.weight.shape[1]

    @property
    def k(self) -> int:
        return self.weight.shape[2]

    def bias_or_zeros(self) -> np.ndarray:
        if self.bias is None:
            return np.zeros(self.c_out, dtype=np.float32)
        return self.bias


@dataclass(frozen=True, eq=False)
class BnParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = DEFAULT_BN_EPS

    def __post_init__(self):
        vecs = {}
        for name in ("gamma", "beta", "running_mean", "running_var"):
            v = np.array(getattr(self, name), dtype=np.float32).reshape(-1)
            v.flags.writeable = False
            vecs[name] = v
            object.__setattr__(self, name, v)
        lengths = {v.size for v in vecs.values()}
        if len(lengths) != 1:
            raise ShapeError(f"BN parameter vectors differ in length: { {k: v.size for k, v in vecs.items()} }")
        if np.any(vecs["running_var"] < 0):
            raise ValueError("running_var must be >= 0")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")

    @property
    def channels(self) -> int:
        return self.gamma.size

    @classmethod
    def identity(cls, channels: int, eps: float = DEFAULT_BN_EPS) -> "BnParams":
        return cls(
            gamma=np.ones(channels),
            beta=np.zeros(channels),
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
            eps=eps,
        )

    def scale_shift(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-channel (scale, shift) in float64 so that bn(x) = x * scale + shift."""
        scale = self.gamma.astype(np.float64) / np.sqrt(self.running_var.astype(np.float64) + self.eps)
        shift = self.beta.astype(np.float64) - self.running_mean.astype(np.float64) * scale
        return scale, shift
