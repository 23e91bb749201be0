"""Integer inference over a QuantizedModel, and MAC / latency benchmarking."""
from __future__ import annotations

import enum
import statistics
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import ShapeMismatch
from ..netgraph.layers import Conv2D, Dense, Fire, GlobalAvgPool, MaxPool
from ..tensor import dequantize, quantize_affine
from .arena import FRAMEBUFFER_BYTES, plan_arena
from .kernels import conv2d_i8, dense_i8, global_avgpool_i8, maxpool_i8

DEFAULT_CLOCK_HZ = 480e6
DEFAULT_MACS_PER_CYCLE = 1.0


class Label(enum.IntEnum):
    NO_MASK = 0
    MASK = 1

    def __str__(self):
        return "Mask" if self is Label.MASK else "No-Mask"


def label_for(p):
    """p >= 0.5 is Mask; the boundary itself goes to Mask."""
    return Label.MASK if p >= 0.5 else Label.NO_MASK


def _run_layer(layer, x, edges):
    qi, qo = edges[layer.in_edge], edges[layer.out_edge]
    rq = layer.requant
    if layer.kind == "conv":
        return conv2d_i8(x, layer.weights, layer.bias, qi.zero_point, qo.zero_point, rq.multiplier, rq.shift,
                         layer.stride, layer.padding, layer.relu)
    return dense_i8(x, layer.weights, layer.bias, qi.zero_point, qo.zero_point, rq.multiplier, rq.shift, layer.relu)


def run_int8(qmodel, x_q, arena=None):
    """Execute the integer graph on quantized input codes; returns head int8 codes.

    With an ``arena`` every produced tensor is written into its planned slice
    of one preallocated int8 buffer, so a bad plan corrupts results.
    """
    n = len(x_q)
    buf = None if arena is None else np.zeros(arena.peak, dtype=np.int8)

    def store(name, value):
        if buf is None:
            return value
        off = arena.offsets[name]
        view = buf[off : off + value.size].reshape(value.shape)
        view[...] = value
        return view

    def load(name, shape):
        if buf is None:
            return vals[name]
        root = arena.buffer_of(name)
        off = arena.offsets[root]
        size = int(np.prod(shape))
        return buf[off : off + size].reshape(shape)

    vals = {"input": store("input", x_q)}
    prev, prev_shape = "input", x_q.shape
    edges, layers = qmodel.edges, qmodel.layers
    for node in qmodel.net_cfg.nodes:
        spec, name = node.spec, node.name
        shape = (n, *node.out_shape)
        x = load(prev, prev_shape)
        if isinstance(spec, (Conv2D, Dense)):
            vals[name] = store(name, _run_layer(layers[name], x, edges))
        elif isinstance(spec, Fire):
            sq = f"{name}.squeeze"
            vals[sq] = store(sq, _run_layer(layers[sq], x, edges))
            s = load(sq, vals[sq].shape)
            out = np.concatenate(
                [_run_layer(layers[f"{name}.expand1x1"], s, edges), _run_layer(layers[f"{name}.expand3x3"], s, edges)],
                axis=-1,
            )
            vals[name] = store(name, out)
        elif isinstance(spec, MaxPool):
            vals[name] = store(name, maxpool_i8(x, spec.pool, spec.step))
        elif isinstance(spec, GlobalAvgPool):
            vals[name] = store(name, global_avgpool_i8(x, edges[name].zero_point))
        else:
            vals[name] = x.reshape(shape)
        prev, prev_shape = name, shape
    return load(prev, prev_shape).copy()


def _check_input(qmodel, images):
    images = np.asarray(images, dtype=np.float32)
    if images.ndim == 3:
        images = images[None]
    if images.ndim != 4 or tuple(images.shape[1:]) != qmodel.net_cfg.input_shape:
        raise ShapeMismatch(f"image shape {images.shape} does not match (N, {qmodel.net_cfg.input_shape})")
    return images


def infer(qmodel, image, capacity=FRAMEBUFFER_BYTES):
    """Classify one normalized (1, H, W, C) float32 image; returns (Label, p).

    Quantize input, run the integer layers inside a planned arena of
    ``capacity`` bytes, dequantize the head logit and apply the sigmoid.
    """
    image = _check_input(qmodel, image)
    if len(image) != 1:
        raise ShapeMismatch("infer takes a single image; use predict for batches")
    arena = plan_arena(qmodel, capacity, batch=1)
    head = run_int8(qmodel, quantize_affine(image, qmodel.input_qp), arena)
    p = float(expit(dequantize(head, qmodel.output_qp, np.float64)).reshape(-1)[0])
    return label_for(p), p


def predict(qmodel, images, batch_size=128):
    """Sigmoid outputs for a batch of images (no arena; same integer kernels)."""
    images = _check_input(qmodel, images)
    out = []
    for i in range(0, len(images), batch_size):
        head = run_int8(qmodel, quantize_affine(images[i : i + batch_size], qmodel.input_qp))
        out.append(expit(dequantize(head, qmodel.output_qp, np.float64)).reshape(-1))
    return np.concatenate(out)


def layer_macs(net_cfg):
    """Multiply-accumulates per parameterized layer (pooling counts as 0)."""
    macs = {}
    for node in net_cfg.nodes:
        spec = node.spec
        if isinstance(spec, Conv2D):
            ho, wo, cout = node.out_shape
            macs[node.name] = ho * wo * cout * spec.kernel_h * spec.kernel_w * node.in_shape[-1]
        elif isinstance(spec, Fire):
            h, w, _ = node.out_shape
            cin, s = node.in_shape[-1], spec.squeeze_1x1
            macs[node.name] = h * w * (s * cin + spec.expand_1x1 * s + spec.expand_3x3 * 9 * s)
        elif isinstance(spec, Dense):
            macs[node.name] = node.in_shape[0] * spec.units
    return macs


@dataclass
class BenchReport:
    total_macs: int
    layer_macs: dict
    arena_peak: int
    latency_s: float
    trials: int
    clock_hz: float
    macs_per_cycle: float

    @property
    def estimated_fps(self):
        """Compute-bound device estimate, clock * MACs/cycle / MACs; not a measurement."""
        return self.clock_hz * self.macs_per_cycle / self.total_macs

    def to_text(self):
        lines = [
            f"total_macs: {self.total_macs}",
            *(f"macs.{k}: {v}" for k, v in self.layer_macs.items()),
            f"arena_peak_bytes: {self.arena_peak}",
            f"arena_peak_kb: {self.arena_peak / 1024:.2f}",
            f"host_latency_ms: {self.latency_s * 1e3:.3f} (median of {self.trials})",
            f"clock_hz: {self.clock_hz:g}",
            f"macs_per_cycle: {self.macs_per_cycle:g}",
            f"estimated_device_fps: {self.estimated_fps:.1f} (model-based estimate, not measured)",
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self):
        rows = ["layer,macs"] + [f"{k},{v}" for k, v in self.layer_macs.items()]
        rows += [
            f"total,{self.total_macs}",
            "",
            "metric,value",
            f"arena_peak_bytes,{self.arena_peak}",
            f"host_latency_s,{self.latency_s:.6f}",
            f"clock_hz,{self.clock_hz:g}",
            f"macs_per_cycle,{self.macs_per_cycle:g}",
            f"estimated_device_fps,{self.estimated_fps:.4f}",
        ]
        return "\n".join(rows) + "\n"


def bench(qmodel, trials=10, clock_hz=DEFAULT_CLOCK_HZ, macs_per_cycle=DEFAULT_MACS_PER_CYCLE,
          capacity=FRAMEBUFFER_BYTES, seed=0):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    macs = layer_macs(qmodel.net_cfg)
    arena = plan_arena(qmodel, capacity)
    image = np.random.default_rng(seed).random((1, *qmodel.net_cfg.input_shape), dtype=np.float32)
    times = []
    for _ in range(trials):
        t0 = time.perf_counter()
        infer(qmodel, image, capacity)
        times.append(time.perf_counter() - t0)
    return BenchReport(sum(macs.values()), macs, arena.peak, statistics.median(times), trials, clock_hz, macs_per_cycle)
