"""Declarative chain architectures: FD-MobileNet and the MobileNet-224 baseline."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .tensor import Shape, as_shape, conv_output_dim

NUM_CLASSES = 1000
IMAGE_SHAPE = Shape(1, 3, 224, 224)


class LayerKind(str, Enum):
    STANDARD_CONV = "standard_conv"
    DEPTHWISE_CONV = "depthwise_conv"
    POINTWISE_CONV = "pointwise_conv"
    BATCH_NORM = "batch_norm"
    RELU = "relu"
    GLOBAL_AVG_POOL = "global_avg_pool"
    FULLY_CONNECTED = "fully_connected"
    SOFTMAX = "softmax"

    def __str__(self) -> str:
        return self.value


CONV_KINDS = frozenset({LayerKind.STANDARD_CONV, LayerKind.DEPTHWISE_CONV, LayerKind.POINTWISE_CONV})
WEIGHTED_KINDS = CONV_KINDS | {LayerKind.FULLY_CONNECTED}
PARAMETERIZED_KINDS = WEIGHTED_KINDS | {LayerKind.BATCH_NORM}


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    c_in: int
    c_out: int
    kernel: int = 1
    stride: int = 1
    pad: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))

    @property
    def is_conv(self) -> bool:
        return self.kind in CONV_KINDS

    @property
    def is_weighted(self) -> bool:
        return self.kind in WEIGHTED_KINDS

    def output_shape(self, shape: Shape) -> Shape:
        """Shape produced from ``shape``; raises ValueError on spatial underflow."""
        if self.is_conv:
            h = conv_output_dim(shape.h, self.kernel, self.stride, self.pad)
            w = conv_output_dim(shape.w, self.kernel, self.stride, self.pad)
            return Shape(shape.n, self.c_out, h, w)
        if self.kind in (LayerKind.GLOBAL_AVG_POOL, LayerKind.FULLY_CONNECTED):
            return Shape(shape.n, self.c_out, 1, 1)
        return Shape(shape.n, self.c_out, shape.h, shape.w)

    def weight_shape(self) -> Optional[tuple[int, ...]]:
        """Shape of this layer's WeightStore blob, or None if it has no parameters."""
        k = self.kernel
        if self.kind in (LayerKind.STANDARD_CONV, LayerKind.POINTWISE_CONV):
            return (self.c_out, self.c_in, k, k)
        if self.kind == LayerKind.DEPTHWISE_CONV:
            return (self.c_out, 1, k, k)
        if self.kind == LayerKind.BATCH_NORM:
            return (4, self.c_out)  # gamma, beta, running_mean, running_var
        if self.kind == LayerKind.FULLY_CONNECTED:
            return (self.c_out, self.c_in + 1)  # last column is the bias
        return None


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    alpha: float
    input: Shape
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "input", as_shape(self.input))
        object.__setattr__(self, "layers", tuple(self.layers))

    def shapes(self) -> list[Shape]:
        """Activation shapes along the chain: the input followed by every layer output."""
        out = [self.input]
        for layer in self.layers:
            out.append(layer.output_shape(out[-1]))
        return out

    def weighted_layers(self) -> list[tuple[int, LayerSpec]]:
        return [(i, layer) for i, layer in enumerate(self.layers) if layer.is_weighted]

    def parameterized_layers(self) -> list[tuple[int, LayerSpec]]:
        return [(i, layer) for i, layer in enumerate(self.layers) if layer.kind in PARAMETERIZED_KINDS]

    def count(self, kind: LayerKind) -> int:
        return sum(1 for layer in self.layers if layer.kind == kind)

    @property
    def label(self) -> str:
        a = f"{self.alpha:g}×"
        if self.name == "fd-mobilenet":
            return f"FD-MobileNet {a}"
        if self.name == "mobilenet":
            return f"{a} MobileNet-224"
        return f"{self.name} {a}"


def scale_channels(base: int, alpha: float) -> int:
    if base < 1:
        raise ValueError(f"base channels must be >= 1, got {base}")
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    return max(1, math.floor(base * alpha + 0.5))


# -- builders ----------------------------------------------------------------


def _conv_bn_relu(kind: LayerKind, c_in: int, c_out: int, kernel: int, stride: int) -> list[LayerSpec]:
    conv = LayerSpec(kind, c_in, c_out, kernel, stride, kernel // 2)
    return [conv, LayerSpec(LayerKind.BATCH_NORM, c_out, c_out), LayerSpec(LayerKind.RELU, c_out, c_out)]


def _separable(c_in: int, c_out: int, stride: int) -> list[LayerSpec]:
    return _conv_bn_relu(LayerKind.DEPTHWISE_CONV, c_in, c_in, 3, stride) + _conv_bn_relu(
        LayerKind.POINTWISE_CONV, c_in, c_out, 1, 1
    )


def _build(name: str, alpha: float, stem: int, blocks: Iterable[tuple[int, int, int]]) -> ArchitectureSpec:
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    s = lambda c: scale_channels(c, alpha)  # noqa: E731
    layers = _conv_bn_relu(LayerKind.STANDARD_CONV, IMAGE_SHAPE.c, s(stem), 3, 2)
    for c_in, c_out, stride in blocks:
        layers += _separable(s(c_in), s(c_out), stride)
    last = layers[-1].c_out
    layers += [
        LayerSpec(LayerKind.GLOBAL_AVG_POOL, last, last),
        LayerSpec(LayerKind.FULLY_CONNECTED, last, NUM_CLASSES),
        LayerSpec(LayerKind.SOFTMAX, NUM_CLASSES, NUM_CLASSES),
    ]
    return ArchitectureSpec(name, float(alpha), IMAGE_SHAPE, tuple(layers))


# (c_in, c_out, stride) of each depthwise separable block, before width scaling.
FD_MOBILENET_BLOCKS = (
    [(32, 64, 2), (64, 128, 2), (128, 128, 1), (128, 256, 2), (256, 256, 1), (256, 512, 2)]
    + [(512, 512, 1)] * 4
    + [(512, 1024, 1)]
)
MOBILENET_BLOCKS = (
    [(32, 64, 1), (64, 128, 2), (128, 128, 1), (128, 256, 2), (256, 256, 1), (256, 512, 2)]
    + [(512, 512, 1)] * 5
    + [(512, 1024, 2), (1024, 1024, 1)]
)


def build_fd_mobilenet(alpha: float = 1.0) -> ArchitectureSpec:
    return _build("fd-mobilenet", alpha, 32, FD_MOBILENET_BLOCKS)


def build_mobilenet(alpha: float = 1.0) -> ArchitectureSpec:
    return _build("mobilenet", alpha, 32, MOBILENET_BLOCKS)


BUILDERS = {"fd-mobilenet": build_fd_mobilenet, "mobilenet": build_mobilenet}


def build(model: str, alpha: float) -> ArchitectureSpec:
    try:
        builder = BUILDERS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; choose from {', '.join(BUILDERS)}") from None
    return builder(alpha)


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    layer_index: Optional[int]
    message: str

    def __str__(self) -> str:
        if self.layer_index is None:
            return self.message
        return f"layer {self.layer_index}: {self.message}"


class ValidationError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def _layer_diagnostics(layer: LayerSpec) -> list[str]:
    problems = []
    if layer.c_in < 1 or layer.c_out < 1:
        problems.append(f"channel counts must be >= 1 (c_in={layer.c_in}, c_out={layer.c_out})")
    if layer.stride not in (1, 2):
        problems.append(f"stride must be 1 or 2, got {layer.stride}")
    if layer.kernel < 1 or layer.pad < 0:
        problems.append(f"invalid kernel {layer.kernel} / pad {layer.pad}")
    if layer.kind == LayerKind.DEPTHWISE_CONV and layer.c_in != layer.c_out:
        problems.append(f"depthwise conv needs c_in == c_out, got {layer.c_in} -> {layer.c_out}")
    if layer.kind == LayerKind.POINTWISE_CONV and (layer.kernel != 1 or layer.stride != 1):
        problems.append(f"pointwise conv needs kernel 1 and stride 1, got kernel {layer.kernel} stride {layer.stride}")
    if layer.kind in (LayerKind.BATCH_NORM, LayerKind.RELU, LayerKind.GLOBAL_AVG_POOL, LayerKind.SOFTMAX):
        if layer.c_in != layer.c_out:
            problems.append(f"{layer.kind} must preserve channels, got {layer.c_in} -> {layer.c_out}")
    return problems


def validate(spec: ArchitectureSpec) -> list[Diagnostic]:
    """Check every ArchitectureSpec invariant; an empty list means the spec is valid."""
    diags: list[Diagnostic] = []
    if not spec.alpha > 0:
        diags.append(Diagnostic(None, f"alpha must be > 0, got {spec.alpha}"))
    if not spec.layers:
        diags.append(Diagnostic(None, "architecture has no layers"))
        return diags

    shape = spec.input
    for i, layer in enumerate(spec.layers):
        diags.extend(Diagnostic(i, msg) for msg in _layer_diagnostics(layer))
        if layer.c_in != shape.c:
            diags.append(Diagnostic(i, f"{layer.kind} expects {layer.c_in} input channels but receives {shape.c}"))
        if layer.kind == LayerKind.FULLY_CONNECTED and (shape.h, shape.w) != (1, 1):
            diags.append(Diagnostic(i, f"fully_connected input must be 1x1 spatially, got {shape.h}x{shape.w}"))
        try:
            shape = layer.output_shape(Shape(shape.n, layer.c_in, shape.h, shape.w) if layer.c_in >= 1 else shape)
        except ValueError as e:
            diags.append(Diagnostic(i, f"spatial underflow: {e}"))
            return diags

    fc = [i for i, layer in enumerate(spec.layers) if layer.kind == LayerKind.FULLY_CONNECTED]
    if len(fc) != 1:
        diags.append(Diagnostic(None, f"expected exactly one fully_connected layer, found {len(fc)}"))
    else:
        for j in range(fc[0] + 1, len(spec.layers)):
            if spec.layers[j].kind != LayerKind.SOFTMAX:
                diags.append(Diagnostic(j, f"{spec.layers[j].kind} after the fully_connected layer; only softmax may follow it"))
    return diags


def check(spec: ArchitectureSpec) -> ArchitectureSpec:
    diags = validate(spec)
    if diags:
        raise ValidationError(diags)
    return spec


# -- JSON --------------------------------------------------------------------


def to_dict(spec: ArchitectureSpec) -> dict:
    return {
        "name": spec.name,
        "alpha": spec.alpha,
        "input": list(spec.input.as_tuple()),
        "layers": [
            {"kind": l.kind.value, "c_in": l.c_in, "c_out": l.c_out, "kernel": l.kernel, "stride": l.stride, "pad": l.pad}
            for l in spec.layers
        ],
    }


def from_dict(d: dict) -> ArchitectureSpec:
    try:
        layers = [
            LayerSpec(
                LayerKind(ld["kind"]),
                int(ld["c_in"]),
                int(ld["c_out"]),
                int(ld["kernel"]),
                int(ld["stride"]),
                int(ld["pad"]),
            )
            for ld in d["layers"]
        ]
        return ArchitectureSpec(str(d["name"]), float(d["alpha"]), as_shape(d["input"]), tuple(layers))
    except KeyError as e:
        raise ValueError(f"architecture JSON is missing field {e}") from None
    except TypeError as e:
        raise ValueError(f"malformed architecture JSON: {e}") from None


def export_json(spec: ArchitectureSpec) -> str:
    return json.dumps(to_dict(spec), indent=2) + "\n"


def import_json(text: str) -> ArchitectureSpec:
    return from_dict(json.loads(text))
