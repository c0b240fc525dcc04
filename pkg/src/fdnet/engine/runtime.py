"""Compiled single-path executor with BN folding and ping-pong activations."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..arch import ArchitectureSpec, LayerKind, LayerSpec, ValidationError, check
from ..ops import fold_bn_into_conv
from ..ops import kernels as K
from ..tensor import ShapeError, Tensor
from .memory import FLOAT_BYTES, ActivationArena, MemoryPlan, plan_memory
from .weights import WeightMismatchError, WeightStore


class CompileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Step:
    layer: LayerSpec
    source_index: int  # index of the layer in the unfolded spec
    weight: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None


def _scratch_floats(spec: ArchitectureSpec) -> int:
    """Largest im2col matrix or depthwise tap product the chain needs."""
    shapes = spec.shapes()
    need = 0
    for i, layer in enumerate(spec.layers):
        out = shapes[i + 1]
        if layer.kind == LayerKind.STANDARD_CONV and not (layer.kernel == 1 and layer.stride == 1 and layer.pad == 0):
            need = max(need, layer.c_in * layer.kernel**2 * out.h * out.w)
        elif layer.kind == LayerKind.DEPTHWISE_CONV:
            inp = shapes[i]
            need = max(need, K.depthwise_scratch_floats(inp.c, inp.h, inp.w, layer.kernel, layer.stride, layer.pad))
    return need


class Engine:
    """Immutable compiled network.

    Activation buffers and scratch are cached per thread and reused across
    calls, so one engine can serve several threads without locking.
    """

    def __init__(self, source: ArchitectureSpec, spec: ArchitectureSpec, steps: tuple[Step, ...], plan: MemoryPlan):
        self.source = source
        self.spec = spec
        self.steps = steps
        self.plan = plan
        self.scratch_floats = _scratch_floats(spec)
        self._local = threading.local()

    def _workspace(self) -> tuple[ActivationArena, Optional[np.ndarray]]:
        ws = getattr(self._local, "workspace", None)
        if ws is None:
            scratch = np.empty(self.scratch_floats, dtype=np.float32) if self.scratch_floats else None
            ws = self._local.workspace = (ActivationArena(self.plan), scratch)
        return ws

    @property
    def num_weighted_layers(self) -> int:
        return sum(1 for s in self.steps if s.layer.is_weighted)

    def infer(self, input: Tensor, arena: Optional[ActivationArena] = None) -> Tensor:
        return Tensor(self.run(input.numpy(), arena=arena).copy())

    def logits(self, input: Tensor) -> np.ndarray:
        """Pre-softmax FC outputs as a fresh (n, classes) array."""
        stop = max(i for i, s in enumerate(self.steps) if s.layer.kind == LayerKind.FULLY_CONNECTED) + 1
        return self.run(input.numpy(), stop=stop).reshape(input.shape.n, -1).copy()

    def run(self, x: np.ndarray, arena: Optional[ActivationArena] = None, stop: Optional[int] = None) -> np.ndarray:
        """Execute steps [0, stop) on ``x``.

        The result is a view into ``arena`` (the calling thread's cached arena
        when none is given) and is overwritten by the next call.
        """
        if tuple(x.shape) != self.spec.input.as_tuple():
            raise ShapeError(f"input shape {tuple(x.shape)} != expected {self.spec.input.as_tuple()}")
        cached_arena, scratch = self._workspace()
        if arena is None:
            arena = cached_arena
        elif arena.plan != self.plan:
            raise ValueError("arena was built for a different memory plan")
        shapes = self.spec.shapes()
        cur = arena.view(0, x.shape)
        cur[...] = x
        for i, step in enumerate(self.steps[:stop]):
            src_buf, dst_buf = self.plan.assignment[i]
            out = arena.view(dst_buf, shapes[i + 1].as_tuple())
            _execute(step, cur, out, scratch)
            cur = out
        return cur


def _execute(step: Step, x: np.ndarray, out: np.ndarray, scratch: Optional[np.ndarray]) -> None:
    layer = step.layer
    kind = layer.kind
    if kind in (LayerKind.STANDARD_CONV, LayerKind.POINTWISE_CONV):
        cols = None
        if scratch is not None and not (layer.kernel == 1 and layer.stride == 1 and layer.pad == 0):
            cols = scratch[: layer.c_in * layer.kernel**2 * out.shape[2] * out.shape[3]]
        K.conv2d_into(x, step.weight, step.bias, layer.stride, layer.pad, out, scratch=cols)
    elif kind == LayerKind.DEPTHWISE_CONV:
        _, c, h, w = x.shape
        need = K.depthwise_scratch_floats(c, h, w, layer.kernel, layer.stride, layer.pad)
        K.depthwise_conv2d_into(x, step.weight, step.bias, layer.stride, layer.pad, out, scratch=scratch[:need])
    elif kind == LayerKind.RELU:
        K.relu_into(x, out)
    elif kind == LayerKind.GLOBAL_AVG_POOL:
        K.global_avg_pool_into(x, out)
    elif kind == LayerKind.FULLY_CONNECTED:
        K.fully_connected_into(x, step.weight, step.bias, out)
    elif kind == LayerKind.SOFTMAX:
        K.softmax_into(x, out)
    else:
        raise CompileError(f"no executor for layer kind {kind}")


def compile(spec: ArchitectureSpec, store: WeightStore) -> Engine:
    """Fold every conv -> BN pair, attach weights and plan activation memory."""
    try:
        check(spec)
        store.check(spec)
    except (ValidationError, WeightMismatchError) as e:
        raise CompileError(str(e)) from e

    steps: list[Step] = []
    layers = spec.layers
    i = 0
    while i < len(layers):
        layer = layers[i]
        if layer.is_conv:
            w = store.conv(i)
            src_index = i
            if i + 1 < len(layers) and layers[i + 1].kind == LayerKind.BATCH_NORM:
                w = fold_bn_into_conv(w, store.bn(i + 1))
                i += 1
            steps.append(Step(layer, src_index, w.weight, w.bias))
        elif layer.kind == LayerKind.BATCH_NORM:
            raise CompileError(f"layer {i}: batch_norm does not follow a convolution and cannot be folded")
        elif layer.kind == LayerKind.FULLY_CONNECTED:
            weight, bias = store.fc(i)
            steps.append(Step(layer, i, np.ascontiguousarray(weight), np.ascontiguousarray(bias)))
        else:
            steps.append(Step(layer, i))
        i += 1

    folded = ArchitectureSpec(spec.name, spec.alpha, spec.input, tuple(s.layer for s in steps))
    return Engine(spec, folded, tuple(steps), plan_memory(folded))


def infer(engine: Engine, input: Tensor) -> Tensor:
    return engine.infer(input)


def peak_activation_bytes(engine: Engine, input: Tensor) -> int:
    """Activation bytes actually allocated while running one inference."""
    arena = ActivationArena(engine.plan)
    engine.infer(input, arena=arena)
    return arena.peak_bytes


__all__ = ["CompileError", "Engine", "Step", "compile", "infer", "peak_activation_bytes", "FLOAT_BYTES"]
