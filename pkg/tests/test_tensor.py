import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdnet.tensor import Shape, Tensor, TensorFormatError, conv_output_dim, read_tensor_file, write_tensor_file


@pytest.mark.parametrize(
    "args, expected",
    [((224, 3, 2, 1), 112), ((56, 1, 1, 0), 56), ((14, 3, 2, 1), 7), ((7, 7, 1, 0), 1)],
)
def test_conv_output_dim(args, expected):
    assert conv_output_dim(*args) == expected


@pytest.mark.parametrize("args", [(224, 0, 1, 0), (224, 3, 0, 1), (2, 5, 1, 1), (4, 3, 1, -1)])
def test_conv_output_dim_rejects(args):
    with pytest.raises(ValueError):
        conv_output_dim(*args)


def test_halving_chain():
    dims = [224]
    while dims[-1] > 7:
        dims.append(conv_output_dim(dims[-1], 3, 2, 1))
    assert dims == [224, 112, 56, 28, 14, 7]


@given(st.integers(1, 64), st.sampled_from([1, 3, 5, 7]))
def test_same_padding_stride2_halves_even_dims(half, k):
    assert conv_output_dim(2 * half, k, 2, k // 2) == half


@given(st.tuples(*[st.integers(1, 5)] * 4))
def test_flat_index_bijection(dims):
    shape = Shape(*dims)
    seen = set()
    for n in range(shape.n):
        for c in range(shape.c):
            for h in range(shape.h):
                for w in range(shape.w):
                    i = shape.flat_index(n, c, h, w)
                    assert shape.unravel(i) == (n, c, h, w)
                    seen.add(i)
    assert seen == set(range(shape.numel))


def test_flat_index_matches_numpy_layout(rng):
    a = rng.standard_normal((2, 3, 4, 5)).astype(np.float32)
    t = Tensor(a)
    assert t.data[t.shape.flat_index(1, 2, 3, 4)] == a[1, 2, 3, 4]


def test_tensor_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Tensor(np.zeros((1, 3, 4)))
    with pytest.raises(ValueError):
        Tensor(np.zeros(5), shape=(1, 1, 2, 2))
    with pytest.raises(ValueError):
        Shape(1, 0, 2, 2)


def test_tensor_is_immutable(rng):
    src = rng.standard_normal((1, 2, 3, 3))
    t = Tensor(src)
    src[0, 0, 0, 0] = 99.0
    assert t[0, 0, 0, 0] != 99.0
    with pytest.raises(ValueError):
        t.numpy()[0, 0, 0, 0] = 1.0


def test_single_element_file_layout():
    payload = write_tensor_file(Tensor.full((1, 1, 1, 1), 0.5))
    assert len(payload) == 24 + 4
    assert payload == b"FDT1" + struct.pack("<5I", 4, 1, 1, 1, 1) + bytes.fromhex("0000003f")


def test_roundtrip_image_sized(rng):
    t = Tensor(rng.standard_normal((1, 3, 224, 224)))
    back = read_tensor_file(write_tensor_file(t))
    assert back.shape == t.shape
    assert back == t


@given(st.lists(st.floats(width=32, allow_nan=False), min_size=1, max_size=24))
def test_roundtrip_bit_exact(values):
    t = Tensor(np.array(values, dtype=np.float32), shape=(1, 1, 1, len(values)))
    back = read_tensor_file(write_tensor_file(t))
    assert back.data.view(np.uint32).tolist() == t.data.view(np.uint32).tolist()


def test_read_errors():
    good = write_tensor_file(Tensor.zeros((1, 2, 2, 2)))
    with pytest.raises(TensorFormatError, match="magic"):
        read_tensor_file(b"XXXX" + good[4:])
    with pytest.raises(TensorFormatError, match="truncated"):
        read_tensor_file(good[:-1])
    with pytest.raises(TensorFormatError, match="truncated"):
        read_tensor_file(good[:10])
    with pytest.raises(TensorFormatError, match="trailing"):
        read_tensor_file(good + b"\0")
    with pytest.raises(TensorFormatError, match="overflow"):
        read_tensor_file(b"FDT1" + struct.pack("<5I", 4, 0xFFFFFFFF, 0xFFFFFFFF, 2, 2))
    with pytest.raises(TensorFormatError, match="ndim"):
        read_tensor_file(b"FDT1" + struct.pack("<5I", 3, 1, 1, 1, 1) + b"\0" * 4)
