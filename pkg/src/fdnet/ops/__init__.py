from .kernels import (
    batch_norm,
    conv2d,
    depthwise_conv2d,
    fold_bn_into_conv,
    fully_connected,
    global_avg_pool,
    pointwise_conv2d,
    relu,
    softmax,
)
from .types import DEFAULT_BN_EPS, BnParams, ConvWeights

__all__ = [
    "BnParams",
    "ConvWeights",
    "DEFAULT_BN_EPS",
    "batch_norm",
    "conv2d",
    "depthwise_conv2d",
    "fold_bn_into_conv",
    "fully_connected",
    "global_avg_pool",
    "pointwise_conv2d",
    "relu",
    "softmax",
]
