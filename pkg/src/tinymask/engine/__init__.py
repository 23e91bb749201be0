"""Integer-only inference: kernels, arena planning, runtime and benchmarking."""
from .arena import FRAMEBUFFER_BYTES, Arena, TensorLife, model_tensors, plan_arena, plan_tensors
from .kernels import conv2d_i8, dense_i8, global_avgpool_i8, maxpool_i8, requantize
from .runtime import (
    DEFAULT_CLOCK_HZ,
    DEFAULT_MACS_PER_CYCLE,
    BenchReport,
    Label,
    bench,
    infer,
    label_for,
    layer_macs,
    predict,
    run_int8,
)

__all__ = [
    "Arena", "BenchReport", "DEFAULT_CLOCK_HZ", "DEFAULT_MACS_PER_CYCLE", "FRAMEBUFFER_BYTES", "Label",
    "TensorLife", "bench", "conv2d_i8", "dense_i8", "global_avgpool_i8", "infer", "label_for",
    "layer_macs", "maxpool_i8", "model_tensors", "plan_arena", "plan_tensors", "predict", "requantize",
    "run_int8",
]
