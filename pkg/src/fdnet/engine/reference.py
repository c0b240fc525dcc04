"""Unfused float64 layer-by-layer execution, used as the end-to-end oracle."""
from __future__ import annotations

import numpy as np

from ..arch import ArchitectureSpec, LayerKind, LayerSpec
from ..ops import DEFAULT_BN_EPS
from ..ops import reference as R
from .weights import WeightStore


def apply_layer(layer: LayerSpec, blob: np.ndarray | None, x: np.ndarray, eps: float = DEFAULT_BN_EPS) -> np.ndarray:
    """One unfused layer in float64; ``blob`` is the layer's WeightStore entry."""
    kind = layer.kind
    if kind in (LayerKind.STANDARD_CONV, LayerKind.POINTWISE_CONV):
        return R.direct_conv2d(x, blob, None, layer.stride, layer.pad)
    if kind == LayerKind.DEPTHWISE_CONV:
        return R.direct_depthwise_conv2d(x, blob, None, layer.stride, layer.pad)
    if kind == LayerKind.BATCH_NORM:
        gamma, beta, mean, var = blob
        return R.direct_batch_norm(x, gamma, beta, mean, var, eps)
    if kind == LayerKind.RELU:
        return R.direct_relu(x)
    if kind == LayerKind.GLOBAL_AVG_POOL:
        return R.direct_global_avg_pool(x)
    if kind == LayerKind.FULLY_CONNECTED:
        return R.direct_fully_connected(x, blob[:, :-1], blob[:, -1])
    if kind == LayerKind.SOFTMAX:
        return R.direct_softmax(x)
    raise ValueError(f"unsupported layer kind {kind}")


def run_reference(
    spec: ArchitectureSpec, store: WeightStore, x: np.ndarray, stop: int | None = None, eps: float = DEFAULT_BN_EPS
) -> np.ndarray:
    """Apply spec.layers[:stop] one at a time with the direct reference ops."""
    cur = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(spec.layers[:stop]):
        cur = apply_layer(layer, store[i].blob if i in store else None, cur, eps)
    return cur


def reference_logits(spec: ArchitectureSpec, store: WeightStore, x: np.ndarray) -> np.ndarray:
    fc = max(i for i, layer in enumerate(spec.layers) if layer.kind == LayerKind.FULLY_CONNECTED)
    return run_reference(spec, store, x, stop=fc + 1).reshape(x.shape[0], -1)
