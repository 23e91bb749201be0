"""Face-mask classification for microcontroller-class targets.

Float32 training, full-integer post-training quantization, a pure int8
inference engine with a static activation arena, and the data and
evaluation tooling around them.
"""
from . import datakit, engine, evalkit, modelio, netgraph, quantizer, tensor, trainer
from .errors import TinyMaskError

__version__ = "0.1.0"

__all__ = ["TinyMaskError", "datakit", "engine", "evalkit", "modelio", "netgraph", "quantizer", "tensor", "trainer"]
