"""Inference engine and complexity analyzer for fast-downsampling depthwise-separable CNNs."""

__version__ = "0.1.0"
