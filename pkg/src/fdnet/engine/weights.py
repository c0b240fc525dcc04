"""Named parameter blobs keyed by layer ordinal, and the FDW1 container format."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..arch import ArchitectureSpec, LayerKind
from ..ops import BnParams, ConvWeights

FDW1_MAGIC = b"FDW1"

KIND_TAGS = {
    LayerKind.STANDARD_CONV: 1,
    LayerKind.DEPTHWISE_CONV: 2,
    LayerKind.POINTWISE_CONV: 3,
    LayerKind.BATCH_NORM: 4,
    LayerKind.FULLY_CONNECTED: 5,
}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}


class WeightFormatError(ValueError):
    pass


class WeightMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WeightEntry:
    ordinal: int
    kind: LayerKind
    blob: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.blob.shape


class WeightStore:
    """Parameters for every conv, BN and FC layer of a spec, in layer order.

    Blob layouts: convs (c_out, c_in, k, k) with c_in = 1 for depthwise;
    BN (4, c) rows gamma, beta, running_mean, running_var; FC (c_out, c_in + 1)
    with the bias in the last column.
    """

    def __init__(self, entries):
        self._entries: dict[int, WeightEntry] = {}
        for e in entries:
            if e.ordinal in self._entries:
                raise WeightMismatchError(f"duplicate weight entry for layer {e.ordinal}")
            blob = np.array(e.blob, dtype=np.float32, order="C")
            blob.flags.writeable = False
            self._entries[e.ordinal] = WeightEntry(int(e.ordinal), LayerKind(e.kind), blob)

    def __iter__(self) -> Iterator[WeightEntry]:
        return iter(sorted(self._entries.values(), key=lambda e: e.ordinal))

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, ordinal: int) -> bool:
        return ordinal in self._entries

    def __getitem__(self, ordinal: int) -> WeightEntry:
        try:
            return self._entries[ordinal]
        except KeyError:
            raise WeightMismatchError(f"layer {ordinal}: no weight entry") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore) or len(self) != len(other):
            return False
        return all(
            a.ordinal == b.ordinal and a.kind == b.kind and a.shape == b.shape and np.array_equal(a.blob, b.blob)
            for a, b in zip(self, other)
        )

    __hash__ = None

    def mismatches(self, spec: ArchitectureSpec) -> list[str]:
        problems = []
        expected = dict(spec.parameterized_layers())
        for i, layer in expected.items():
            if i not in self._entries:
                problems.append(f"layer {i} ({layer.kind}): missing weight entry")
                continue
            e = self._entries[i]
            if e.kind != layer.kind:
                problems.append(f"layer {i} ({layer.kind}): weight entry has kind {e.kind}")
            elif e.shape != layer.weight_shape():
                problems.append(f"layer {i} ({layer.kind}): weight shape {e.shape} != expected {layer.weight_shape()}")
        for i in sorted(set(self._entries) - set(expected)):
            problems.append(f"layer {i}: unexpected weight entry ({self._entries[i].kind})")
        return problems

    def check(self, spec: ArchitectureSpec) -> None:
        problems = self.mismatches(spec)
        if problems:
            raise WeightMismatchError("; ".join(problems))

    # typed accessors

    def conv(self, ordinal: int) -> ConvWeights:
        return ConvWeights(self[ordinal].blob)

    def bn(self, ordinal: int, eps: float | None = None) -> BnParams:
        g, b, m, v = self[ordinal].blob
        return BnParams(g, b, m, v) if eps is None else BnParams(g, b, m, v, eps)

    def fc(self, ordinal: int) -> tuple[np.ndarray, np.ndarray]:
        blob = self[ordinal].blob
        return blob[:, :-1], blob[:, -1]

    # serialization

    def to_bytes(self) -> bytes:
        parts = [FDW1_MAGIC, struct.pack("<I", len(self))]
        for e in self:
            parts.append(struct.pack("<IBI", e.ordinal, KIND_TAGS[e.kind], e.blob.ndim))
            parts.append(struct.pack(f"<{e.blob.ndim}I", *e.blob.shape))
            parts.append(e.blob.astype("<f4", copy=False).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, payload: bytes) -> "WeightStore":
        payload = bytes(payload)
        if payload[:4] != FDW1_MAGIC:
            raise WeightFormatError(f"bad magic {payload[:4]!r}, expected {FDW1_MAGIC!r}")
        pos = 4

        def take(fmt):
            nonlocal pos
            size = struct.calcsize(fmt)
            if pos + size > len(payload):
                raise WeightFormatError(f"truncated weight file at byte {pos}")
            vals = struct.unpack_from(fmt, payload, pos)
            pos += size
            return vals

        (count,) = take("<I")
        entries = []
        for _ in range(count):
            ordinal, tag, ndim = take("<IBI")
            if tag not in TAG_KINDS:
                raise WeightFormatError(f"layer {ordinal}: unknown kind tag {tag}")
            if not 1 <= ndim <= 8:
                raise WeightFormatError(f"layer {ordinal}: unsupported ndim {ndim}")
            dims = take(f"<{ndim}I")
            numel = int(np.prod(dims, dtype=np.int64))
            if pos + 4 * numel > len(payload):
                raise WeightFormatError(f"layer {ordinal}: truncated blob")
            blob = np.frombuffer(payload, dtype="<f4", count=numel, offset=pos).reshape(dims)
            pos += 4 * numel
            entries.append(WeightEntry(ordinal, TAG_KINDS[tag], blob))
        if pos != len(payload):
            raise WeightFormatError(f"{len(payload) - pos} trailing bytes after last entry")
        return cls(entries)


def _fans(kind: LayerKind, shape: tuple[int, ...]) -> tuple[int, int]:
    if kind == LayerKind.FULLY_CONNECTED:
        return shape[1] - 1, shape[0]
    c_out, c_in_per_group, k, _ = shape
    if kind == LayerKind.DEPTHWISE_CONV:
        return k * k, k * k
    return c_in_per_group * k * k, c_out * k * k


def init_random_weights(spec: ArchitectureSpec, seed: int = 0) -> WeightStore:
    """Deterministic Glorot-uniform weights; identity batch norms; zero FC bias."""
    rng = np.random.default_rng(seed)
    entries = []
    for i, layer in spec.parameterized_layers():
        shape = layer.weight_shape()
        if layer.kind == LayerKind.BATCH_NORM:
            c = layer.c_out
            blob = np.stack([np.ones(c), np.zeros(c), np.zeros(c), np.ones(c)])
        else:
            fan_in, fan_out = _fans(layer.kind, shape)
            s = np.sqrt(6.0 / (fan_in + fan_out))
            blob = rng.uniform(-s, s, size=shape).astype(np.float32)
            if layer.kind == LayerKind.FULLY_CONNECTED:
                blob[:, -1] = 0.0
        entries.append(WeightEntry(i, layer.kind, blob))
    return WeightStore(entries)


def zero_weights(spec: ArchitectureSpec) -> WeightStore:
    """All-zero conv/FC weights with identity batch norms."""
    store = init_random_weights(spec)
    return WeightStore(
        WeightEntry(e.ordinal, e.kind, e.blob if e.kind == LayerKind.BATCH_NORM else np.zeros_like(e.blob))
        for e in store
    )
