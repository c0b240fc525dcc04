from .memory import ActivationArena, MemoryPlan, plan_memory
from .preprocess import load_image, preprocess, read_ppm, write_ppm
from .reference import reference_logits, run_reference
from .runtime import CompileError, Engine, compile, infer, peak_activation_bytes
from .weights import (
    WeightEntry,
    WeightFormatError,
    WeightMismatchError,
    WeightStore,
    init_random_weights,
    zero_weights,
)

__all__ = [
    "ActivationArena",
    "CompileError",
    "Engine",
    "MemoryPlan",
    "WeightEntry",
    "WeightFormatError",
    "WeightMismatchError",
    "WeightStore",
    "compile",
    "infer",
    "init_random_weights",
    "load_image",
    "peak_activation_bytes",
    "plan_memory",
    "preprocess",
    "read_ppm",
    "reference_logits",
    "run_reference",
    "write_ppm",
    "zero_weights",
]
