"""Dense NCHW float32 tensors, shape arithmetic and the FDT1 file format."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

FDT1_MAGIC = b"FDT1"
_HEADER = struct.Struct("<4sI4I")  # magic, ndim, n, c, h, w
_U32_MAX = 0xFFFFFFFF


class TensorFormatError(ValueError):
    """Raised when an FDT1 payload cannot be decoded."""


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


@dataclass(frozen=True)
class Shape:
    n: int
    c: int
    h: int
    w: int

    def __post_init__(self):
        for name, v in zip("nchw", self):
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"shape dim {name}={v!r} must be an integer >= 1")

    def __iter__(self) -> Iterator[int]:
        return iter((self.n, self.c, self.h, self.w))

    @property
    def numel(self) -> int:
        return self.n * self.c * self.h * self.w

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n, self.c, self.h, self.w)

    def flat_index(self, n: int, c: int, h: int, w: int) -> int:
        if not (0 <= n < self.n and 0 <= c < self.c and 0 <= h < self.h and 0 <= w < self.w):
            raise IndexError(f"index {(n, c, h, w)} out of range for {self.as_tuple()}")
        return ((n * self.c + c) * self.h + h) * self.w + w

    def unravel(self, index: int) -> tuple[int, int, int, int]:
        if not 0 <= index < self.numel:
            raise IndexError(f"flat index {index} out of range for {self.as_tuple()}")
        index, w = divmod(index, self.w)
        index, h = divmod(index, self.h)
        n, c = divmod(index, self.c)
        return (n, c, h, w)


ShapeLike = Union[Shape, tuple, list]


def as_shape(shape: ShapeLike) -> Shape:
    if isinstance(shape, Shape):
        return shape
    if len(shape) != 4:
        raise ValueError(f"expected 4 dims (n, c, h, w), got {len(shape)}")
    return Shape(*(int(d) for d in shape))


class Tensor:
    """Read-only 4-D float32 array in (n, c, h, w) row-major order.

    The backing array is copied on construction (unless already an owned
    float32 C-contiguous array) and then frozen, so a Tensor can be shared
    between threads without locking.
    """

    __slots__ = ("_array",)

    def __init__(self, array, shape: ShapeLike | None = None):
        a = np.asarray(array, dtype=np.float32)
        if shape is not None:
            s = as_shape(shape)
            if a.size != s.numel:
                raise ValueError(f"data length {a.size} does not match shape {s.as_tuple()} ({s.numel})")
            a = a.reshape(s.as_tuple())
        if a.ndim != 4:
            raise ValueError(f"tensor must be 4-D (n, c, h, w), got ndim={a.ndim}")
        as_shape(a.shape)  # validates dims >= 1
        a = np.array(a, dtype=np.float32, order="C", copy=True)
        a.flags.writeable = False
        self._array = a

    @classmethod
    def zeros(cls, shape: ShapeLike) -> "Tensor":
        return cls(np.zeros(as_shape(shape).as_tuple(), dtype=np.float32))

    @classmethod
    def full(cls, shape: ShapeLike, value: float) -> "Tensor":
        return cls(np.full(as_shape(shape).as_tuple(), value, dtype=np.float32))

    @property
    def shape(self) -> Shape:
        return Shape(*self._array.shape)

    @property
    def data(self) -> np.ndarray:
        """Flat read-only view in flat-index order."""
        return self._array.reshape(-1)

    def numpy(self) -> np.ndarray:
        """Read-only 4-D view. Use ``.copy()`` for a mutable array."""
        return self._array

    def __getitem__(self, idx):
        return self._array[idx]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self._array.shape == other._array.shape and np.array_equal(
            self._array.view(np.uint32), other._array.view(np.uint32)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape.as_tuple()})"


def conv_output_dim(in_dim: int, kernel: int, stride: int, pad: int) -> int:
    if kernel < 1:
        raise ValueError(f"kernel must be >= 1, got {kernel}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    if in_dim + 2 * pad < kernel:
        raise ValueError(f"padded input {in_dim}+2*{pad} is smaller than kernel {kernel}")
    return (in_dim + 2 * pad - kernel) // stride + 1


def write_tensor_file(tensor: Tensor) -> bytes:
    a = tensor.numpy()
    header = _HEADER.pack(FDT1_MAGIC, 4, *a.shape)
    return header + a.astype("<f4", copy=False).tobytes(order="C")


def read_tensor_file(payload: bytes) -> Tensor:
    payload = bytes(payload)
    if len(payload) < 4 or payload[:4] != FDT1_MAGIC:
        raise TensorFormatError(f"bad magic {payload[:4]!r}, expected {FDT1_MAGIC!r}")
    if len(payload) < _HEADER.size:
        raise TensorFormatError(f"truncated header: {len(payload)} < {_HEADER.size} bytes")
    _, ndim, *dims = _HEADER.unpack_from(payload)
    if ndim != 4:
        raise TensorFormatError(f"ndim must be 4, got {ndim}")
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"dims must be >= 1, got {dims}")
    numel = 1
    for d in dims:
        numel *= d
    if numel > _U32_MAX:
        raise TensorFormatError(f"dims {dims} overflow the element count")
    expected = _HEADER.size + numel * 4
    if len(payload) < expected:
        raise TensorFormatError(
            f"truncated payload: need {numel * 4} data bytes, have {len(payload) - _HEADER.size}"
        )
    if len(payload) > expected:
        raise TensorFormatError(f"{len(payload) - expected} trailing bytes after tensor data")
    data = np.frombuffer(payload, dtype="<f4", count=numel, offset=_HEADER.size)
    return Tensor(data.astype(np.float32), dims)
