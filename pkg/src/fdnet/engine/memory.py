"""Ping-pong activation memory for single-path networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..arch import ArchitectureSpec, validate

FLOAT_BYTES = 4


@dataclass(frozen=True)
class MemoryPlan:
    buffer_count: int
    buffer_bytes: int
    # (input buffer, output buffer) per layer; the network input lives in buffer 0
    assignment: tuple[tuple[int, int], ...]

    @property
    def peak_bytes(self) -> int:
        return self.buffer_count * self.buffer_bytes


def plan_memory(spec: ArchitectureSpec) -> MemoryPlan:
    diags = validate(spec)
    if diags:
        raise ValueError(f"cannot plan memory for an invalid chain: {diags[0]}")
    largest = max(s.numel for s in spec.shapes())
    assignment = tuple((i % 2, (i + 1) % 2) for i in range(len(spec.layers)))
    return MemoryPlan(2, largest * FLOAT_BYTES, assignment)


class ActivationArena:
    """Per-call instantiation of a MemoryPlan.

    Buffers are allocated lazily on first use and accounted, so tests can
    assert on the activation memory an inference actually touched.
    """

    def __init__(self, plan: MemoryPlan):
        self.plan = plan
        self._buffers: list[np.ndarray | None] = [None] * plan.buffer_count
        self.allocated_bytes = 0
        self.peak_bytes = 0
        self.allocations = 0

    def view(self, buffer_id: int, shape) -> np.ndarray:
        numel = int(np.prod(shape))
        if numel * FLOAT_BYTES > self.plan.buffer_bytes:
            raise ValueError(f"activation of shape {tuple(shape)} exceeds buffer size {self.plan.buffer_bytes}")
        buf = self._buffers[buffer_id]
        if buf is None:
            buf = np.empty(self.plan.buffer_bytes // FLOAT_BYTES, dtype=np.float32)
            self._buffers[buffer_id] = buf
            self.allocations += 1
            self.allocated_bytes += buf.nbytes
            self.peak_bytes = max(self.peak_bytes, self.allocated_bytes)
        return buf[:numel].reshape(shape)

    def owns(self, array: np.ndarray) -> bool:
        return any(b is not None and np.shares_memory(array, b) for b in self._buffers)
