"""MAC and parameter accounting.

Convention: one multiply-accumulate counts as one FLOP unit, and batch norm,
ReLU, pooling and softmax cost nothing. Under this convention the per-stage
figures of the FD-MobileNet layer table are reproduced exactly.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .arch import ArchitectureSpec, LayerKind, LayerSpec
from .tensor import Shape, ShapeError

CONVENTION = "1 MAC = 1 FLOP; BN/ReLU/pool/softmax = 0"
CSV_FIELDS = ("layer_index", "kind", "out_h", "out_w", "c_out", "macs", "params")


def macs_of_layer(layer: LayerSpec, in_shape: Shape) -> int:
    if in_shape.c != layer.c_in:
        raise ShapeError(f"{layer.kind} expects {layer.c_in} input channels, shape has {in_shape.c}")
    out = layer.output_shape(in_shape)
    k2 = layer.kernel * layer.kernel
    pixels = out.n * out.h * out.w
    if layer.kind in (LayerKind.STANDARD_CONV, LayerKind.POINTWISE_CONV):
        return pixels * layer.c_out * layer.c_in * k2
    if layer.kind == LayerKind.DEPTHWISE_CONV:
        return pixels * layer.c_out * k2
    if layer.kind == LayerKind.FULLY_CONNECTED:
        if (in_shape.h, in_shape.w) != (1, 1):
            raise ShapeError(f"fully_connected input must be 1x1, got {in_shape.h}x{in_shape.w}")
        return in_shape.n * layer.c_in * layer.c_out
    return 0


def params_of_layer(layer: LayerSpec) -> int:
    k2 = layer.kernel * layer.kernel
    if layer.kind in (LayerKind.STANDARD_CONV, LayerKind.POINTWISE_CONV):
        return k2 * layer.c_in * layer.c_out
    if layer.kind == LayerKind.DEPTHWISE_CONV:
        return k2 * layer.c_out
    if layer.kind == LayerKind.FULLY_CONNECTED:
        return (layer.c_in + 1) * layer.c_out
    if layer.kind == LayerKind.BATCH_NORM:
        return 4 * layer.c_out
    return 0


@dataclass(frozen=True)
class LayerCost:
    index: int
    kind: LayerKind
    out_h: int
    out_w: int
    c_out: int
    macs: int
    params: int


@dataclass(frozen=True)
class StageCost:
    resolution: tuple[int, int]
    macs: int
    layer_indices: tuple[int, ...]

    @property
    def mflops(self) -> float:
        return self.macs / 1e6


@dataclass(frozen=True)
class FlopsReport:
    name: str
    alpha: float
    per_layer: tuple[LayerCost, ...]
    per_stage: tuple[StageCost, ...]
    total_macs: int
    total_params: int

    @property
    def total_mflops(self) -> float:
        return self.total_macs / 1e6

    def stage(self, h: int, w: int | None = None) -> StageCost:
        key = (h, h if w is None else w)
        for s in self.per_stage:
            if s.resolution == key:
                return s
        raise KeyError(f"no stage at resolution {key[0]}x{key[1]}")

    def largest_resolutions_macs(self, count: int = 4) -> int:
        """MACs spent in the ``count`` stages with the largest output resolution."""
        ranked = sorted(self.per_stage, key=lambda s: s.resolution[0] * s.resolution[1], reverse=True)
        return sum(s.macs for s in ranked[:count])


def stage_report(spec: ArchitectureSpec) -> FlopsReport:
    shapes = spec.shapes()
    per_layer = []
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, layer in enumerate(spec.layers):
        out = shapes[i + 1]
        per_layer.append(
            LayerCost(i, layer.kind, out.h, out.w, out.c, macs_of_layer(layer, shapes[i]), params_of_layer(layer))
        )
        buckets.setdefault((out.h, out.w), []).append(i)
    per_stage = tuple(
        StageCost(res, sum(per_layer[i].macs for i in idx), tuple(idx)) for res, idx in buckets.items()
    )
    return FlopsReport(
        name=spec.name,
        alpha=spec.alpha,
        per_layer=tuple(per_layer),
        per_stage=per_stage,
        total_macs=sum(c.macs for c in per_layer),
        total_params=sum(c.params for c in per_layer),
    )


def total_macs(spec: ArchitectureSpec) -> int:
    shapes = spec.shapes()
    return sum(macs_of_layer(layer, shapes[i]) for i, layer in enumerate(spec.layers))


def params_of(spec: ArchitectureSpec) -> int:
    return sum(params_of_layer(layer) for layer in spec.layers)


@dataclass(frozen=True)
class ScheduleEntry:
    ordinal: int  # 1-based position among weighted (conv + fc) layers
    layer_index: int
    factor: int
    h: int
    w: int


def downsampling_schedule(spec: ArchitectureSpec) -> list[ScheduleEntry]:
    """Cumulative stride product after each weighted layer."""
    shapes = spec.shapes()
    factor = 1
    entries = []
    for ordinal, (i, layer) in enumerate(spec.weighted_layers(), start=1):
        if layer.is_conv:
            factor *= layer.stride
        out = shapes[i + 1]
        entries.append(ScheduleEntry(ordinal, i, factor, out.h, out.w))
    return entries


def layers_to_reach(schedule: list[ScheduleEntry], factor: int) -> int | None:
    """First weighted-layer ordinal whose cumulative downsampling is at least ``factor``."""
    for e in schedule:
        if e.factor >= factor:
            return e.ordinal
    return None


def separable_reduction_ratio(k: int, c_out: int, exact: bool = False) -> Union[float, Fraction]:
    """MACs of a standard k x k conv over those of its depthwise + pointwise factorization."""
    if k < 1 or c_out < 1:
        raise ValueError(f"k and c_out must be >= 1, got k={k}, c_out={c_out}")
    r = Fraction(k * k * c_out, k * k + c_out)
    return r if exact else float(r)


def measured_separable_ratio(k: int, c_in: int, c_out: int, size: int = 14) -> Fraction:
    """Same ratio, counted from layer MACs rather than the closed form."""
    shape = Shape(1, c_in, size, size)
    pad = k // 2
    std = macs_of_layer(LayerSpec(LayerKind.STANDARD_CONV, c_in, c_out, k, 1, pad), shape)
    dw = LayerSpec(LayerKind.DEPTHWISE_CONV, c_in, c_in, k, 1, pad)
    pw = LayerSpec(LayerKind.POINTWISE_CONV, c_in, c_out, 1, 1, 0)
    sep = macs_of_layer(dw, shape) + macs_of_layer(pw, dw.output_shape(shape))
    return Fraction(std, sep)


# -- formatting ----------------------------------------------------------------


def fmt_mflops(macs: int) -> str:
    return f"{macs / 1e6:.1f}"


def format_text(report: FlopsReport, per_layer: bool = False) -> str:
    lines = [
        f"# {report.name} alpha={report.alpha:g}  ({CONVENTION})",
        f"{'Output Size':>12}  {'Layers':>6}  {'MFLOPs':>8}",
    ]
    for s in report.per_stage:
        lines.append(f"{s.resolution[0]:>5}x{s.resolution[1]:<6}  {len(s.layer_indices):>6}  {fmt_mflops(s.macs):>8}")
    if per_layer:
        lines.append("")
        lines.append(f"{'idx':>4}  {'kind':<16} {'out':>9} {'c_out':>6} {'MACs':>12} {'params':>9}")
        for c in report.per_layer:
            lines.append(
                f"{c.index:>4}  {c.kind.value:<16} {f'{c.out_h}x{c.out_w}':>9} {c.c_out:>6} {c.macs:>12} {c.params:>9}"
            )
    lines.append(f"largest-4-resolution MFLOPs: {fmt_mflops(report.largest_resolutions_macs(4))}")
    lines.append(f"total MACs: {report.total_macs}")
    lines.append(f"total MFLOPs: {fmt_mflops(report.total_macs)}")
    lines.append(f"total params: {report.total_params}")
    return "\n".join(lines) + "\n"


def format_csv(report: FlopsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for c in report.per_layer:
        writer.writerow((c.index, c.kind.value, c.out_h, c.out_w, c.c_out, c.macs, c.params))
    return buf.getvalue()
