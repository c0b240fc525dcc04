import csv
import io
from fractions import Fraction

import numpy as np
import pytest

from fdnet.arch import ArchitectureSpec, LayerKind, LayerSpec, build_fd_mobilenet, build_mobilenet, validate
from fdnet.complexity import (
    downsampling_schedule,
    format_csv,
    format_text,
    layers_to_reach,
    macs_of_layer,
    measured_separable_ratio,
    params_of,
    separable_reduction_ratio,
    stage_report,
    total_macs,
)
from fdnet.engine import init_random_weights
from fdnet.ops import reference as R
from fdnet.tensor import Shape, ShapeError

L = LayerKind


def test_first_layer_macs():
    layer = LayerSpec(L.STANDARD_CONV, 3, 32, 3, 2, 1)
    assert macs_of_layer(layer, Shape(1, 3, 224, 224)) == 10_838_016


def test_last_pointwise_macs():
    assert macs_of_layer(LayerSpec(L.POINTWISE_CONV, 512, 1024), Shape(1, 512, 7, 7)) == 7 * 7 * 1024 * 512 == 25_690_112


def test_fc_macs():
    assert macs_of_layer(LayerSpec(L.FULLY_CONNECTED, 1024, 1000), Shape(1, 1024, 1, 1)) == 1_024_000


def test_free_layers():
    shape = Shape(1, 8, 5, 5)
    for kind in (L.BATCH_NORM, L.RELU, L.GLOBAL_AVG_POOL, L.SOFTMAX):
        assert macs_of_layer(LayerSpec(kind, 8, 8), shape) == 0


def test_macs_shape_mismatch():
    with pytest.raises(ShapeError):
        macs_of_layer(LayerSpec(L.POINTWISE_CONV, 16, 32), Shape(1, 8, 4, 4))


def test_fd_mobilenet_stage_table():
    report = stage_report(build_fd_mobilenet(1.0))
    got = [(s.resolution[0], round(s.mflops, 1)) for s in report.per_stage]
    assert got == [(112, 10.8), (56, 7.3), (28, 20.6), (14, 19.9), (7, 84.7), (1, 1.0)]
    assert report.total_macs == sum(s.macs for s in report.per_stage) == sum(c.macs for c in report.per_layer)
    assert report.total_macs == 144_489_728
    assert round(report.largest_resolutions_macs(4) / 1e6) == 59


def test_mobilenet_budget_claims():
    report = stage_report(build_mobilenet(0.5))
    assert round(report.total_mflops) == 149
    assert round(report.largest_resolutions_macs(4) / 1e6) == 129
    # full-width MobileNet-224 is the well-known 569M MACs
    assert round(total_macs(build_mobilenet(1.0)) / 1e6) == 569


@pytest.mark.parametrize(
    "builder, alpha, mflops",
    [(build_fd_mobilenet, 1.0, 144), (build_fd_mobilenet, 0.5, 40), (build_fd_mobilenet, 0.25, 12),
     (build_mobilenet, 0.5, 149), (build_mobilenet, 0.25, 41), (build_mobilenet, 0.125, 12)],
)
def test_complexity_column(builder, alpha, mflops):
    assert abs(total_macs(builder(alpha)) / 1e6 - mflops) <= 1.0


def test_schedules():
    fd = downsampling_schedule(build_fd_mobilenet(1.0))
    mb = downsampling_schedule(build_mobilenet(1.0))
    assert (layers_to_reach(fd, 4), layers_to_reach(fd, 32)) == (2, 12)
    assert (layers_to_reach(mb, 4), layers_to_reach(mb, 32)) == (4, 24)
    for sched in (fd, mb):
        factors = [e.factor for e in sched]
        assert factors == sorted(factors)
        assert all(f & (f - 1) == 0 for f in factors)
    assert fd[11].h == fd[11].w == 7


def test_stride_one_chain_has_constant_schedule():
    layers = (LayerSpec(L.STANDARD_CONV, 3, 4, 3, 1, 1), LayerSpec(L.DEPTHWISE_CONV, 4, 4, 3, 1, 1),
              LayerSpec(L.POINTWISE_CONV, 4, 8), LayerSpec(L.GLOBAL_AVG_POOL, 8, 8),
              LayerSpec(L.FULLY_CONNECTED, 8, 10), LayerSpec(L.SOFTMAX, 10, 10))
    sched = downsampling_schedule(ArchitectureSpec("flat", 1.0, (1, 3, 9, 9), layers))
    assert [e.factor for e in sched] == [1, 1, 1, 1]
    assert layers_to_reach(sched, 2) is None


def test_separable_ratio_values():
    assert separable_reduction_ratio(3, 512) == pytest.approx(9 * 512 / 521)
    assert round(separable_reduction_ratio(3, 512), 2) == 8.84
    assert separable_reduction_ratio(3, 9) == 4.5
    ratios = [separable_reduction_ratio(3, c) for c in (10**3, 10**5, 10**7)]
    assert ratios == sorted(ratios) and all(r < 9 for r in ratios) and 9 - ratios[-1] < 1e-4
    assert separable_reduction_ratio(3, 7, exact=True) == Fraction(63, 16)
    with pytest.raises(ValueError):
        separable_reduction_ratio(0, 5)


@pytest.mark.parametrize("c_in", [1, 17, 128])
def test_measured_ratio_is_independent_of_input_width(c_in):
    assert measured_separable_ratio(3, c_in, 256) == separable_reduction_ratio(3, 256, exact=True)


def test_width_scaling_exponents():
    base, half = stage_report(build_fd_mobilenet(1.0)), stage_report(build_fd_mobilenet(0.5))
    for a, b in zip(base.per_layer, half.per_layer):
        if a.kind == L.POINTWISE_CONV:
            assert b.macs * 4 == a.macs
        elif a.kind in (L.DEPTHWISE_CONV, L.STANDARD_CONV, L.FULLY_CONNECTED):
            # the class count is fixed, so FC only scales with its input width
            assert b.macs * 2 == a.macs


def test_grouping_independence():
    spec = build_fd_mobilenet(1.0)
    shapes = spec.shapes()
    per_layer = [macs_of_layer(l, shapes[i]) for i, l in enumerate(spec.layers)]
    assert sum(per_layer) == total_macs(spec) == stage_report(spec).total_macs


def _tiny_spec():
    return ArchitectureSpec(
        "tiny",
        1.0,
        (1, 3, 11, 10),
        (
            LayerSpec(L.STANDARD_CONV, 3, 4, 3, 2, 1), LayerSpec(L.BATCH_NORM, 4, 4), LayerSpec(L.RELU, 4, 4),
            LayerSpec(L.DEPTHWISE_CONV, 4, 4, 3, 2, 1), LayerSpec(L.POINTWISE_CONV, 4, 6),
            LayerSpec(L.DEPTHWISE_CONV, 6, 6, 3, 1, 1), LayerSpec(L.POINTWISE_CONV, 6, 5),
            LayerSpec(L.STANDARD_CONV, 5, 3, 5, 1, 2),
            LayerSpec(L.GLOBAL_AVG_POOL, 3, 3), LayerSpec(L.FULLY_CONNECTED, 3, 7), LayerSpec(L.SOFTMAX, 7, 7),
        ),
    )


def test_macs_match_instrumented_naive_oracles(rng):
    spec = _tiny_spec()
    assert validate(spec) == []
    store = init_random_weights(spec, 3)
    x = rng.standard_normal(spec.input.as_tuple())
    shapes = spec.shapes()
    for i, layer in enumerate(spec.layers):
        counter = R.MacCounter()
        if layer.kind in (L.STANDARD_CONV, L.POINTWISE_CONV):
            x = R.naive_conv2d(x, store[i].blob, None, layer.stride, layer.pad, counter)
        elif layer.kind == L.DEPTHWISE_CONV:
            x = R.naive_depthwise_conv2d(x, store[i].blob, None, layer.stride, layer.pad, counter)
        elif layer.kind == L.FULLY_CONNECTED:
            x = R.naive_fully_connected(x, store[i].blob[:, :-1], store[i].blob[:, -1], counter)
        elif layer.kind == L.GLOBAL_AVG_POOL:
            x = R.naive_global_avg_pool(x)
        else:
            x = R.naive_relu(x) if layer.kind == L.RELU else x
        assert x.shape == shapes[i + 1].as_tuple()
        assert counter.count == macs_of_layer(layer, shapes[i]), (i, layer)


def test_params_equal_weight_store_size():
    for spec in (build_fd_mobilenet(0.5), build_mobilenet(0.25), _tiny_spec()):
        store = init_random_weights(spec, 0)
        assert params_of(spec) == sum(e.blob.size for e in store) == stage_report(spec).total_params


def test_text_and_csv_formats():
    report = stage_report(build_fd_mobilenet(1.0))
    text = format_text(report)
    assert "1 MAC = 1 FLOP" in text
    assert "total MFLOPs: 144.5" in text
    assert "largest-4-resolution MFLOPs: 58.7" in text
    for v in ("10.8", "7.3", "20.6", "19.9", "84.7"):
        assert v in text
    rows = list(csv.DictReader(io.StringIO(format_csv(report))))
    assert list(rows[0]) == ["layer_index", "kind", "out_h", "out_w", "c_out", "macs", "params"]
    assert len(rows) == len(build_fd_mobilenet(1.0).layers)
    assert sum(int(r["macs"]) for r in rows) == report.total_macs
    assert format_csv(report) == format_csv(stage_report(build_fd_mobilenet(1.0)))
