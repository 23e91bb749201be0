"""Post-training full-integer quantization.

Activations are per-tensor asymmetric int8, weights per-output-channel
symmetric int8, biases int32 at scale ``s_in * s_w``. Each conv/dense output
channel gets a fixed-point requantization multiplier ``M0 * 2**-shift``
with ``M0`` stored as a Q31 integer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import CalibrationIncomplete, DataError, InvalidQuantParams, ShapeMismatch
from .netgraph import Conv2D, Dense, Fire, GlobalAvgPool, MaxPool, Network, NetworkConfig, forward
from .netgraph import functional as F
from .tensor import INT8_MAX, INT8_MIN, INT32_MAX, INT32_MIN, QuantParams, dequantize, quantize_affine, round_half_away

SCALE_FLOOR = 1e-7


@dataclass
class EdgeStats:
    min: float
    max: float
    count: int = 0

    def update(self, x):
        self.min = min(self.min, float(x.min()))
        self.max = max(self.max, float(x.max()))
        self.count += len(x)


@dataclass
class CalibrationStats:
    edges: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.edges[name]

    def __contains__(self, name):
        return name in self.edges

    def merge(self, other):
        for k, s in other.edges.items():
            mine = self.edges.get(k)
            if mine is None:
                self.edges[k] = EdgeStats(s.min, s.max, s.count)
            else:
                mine.min, mine.max, mine.count = min(mine.min, s.min), max(mine.max, s.max), mine.count + s.count
        return self


def calibrate(net: Network, params, representative_set, batch_size=64) -> CalibrationStats:
    """Observe min/max on every edge over the representative set, nudged to include 0."""
    x = np.asarray(representative_set, dtype=np.float32)
    if x.ndim != 4 or len(x) == 0:
        raise DataError("representative set must be a non-empty NHWC batch")
    stats = CalibrationStats()
    for start in range(0, len(x), batch_size):
        rec = forward(net, params, x[start : start + batch_size], "infer")
        for name, act in rec.edges.items():
            s = stats.edges.setdefault(name, EdgeStats(math.inf, -math.inf))
            s.update(act.reshape(len(act), -1))
    for s in stats.edges.values():
        s.min = min(s.min, 0.0)
        s.max = max(s.max, 0.0)
    return stats


def activation_qparams(lo, hi) -> QuantParams:
    """Asymmetric int8 params covering ``[lo, hi]`` (assumed to contain 0)."""
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    scale = (hi - lo) / 255.0
    if scale <= 0:
        scale = SCALE_FLOOR
    zp = int(round_half_away(-lo / scale)) - 128
    return QuantParams(scale, int(np.clip(zp, INT8_MIN, INT8_MAX)))


def quantize_weights(w):
    """Per-output-channel symmetric int8: ``scale_c = max|w_c| / 127``."""
    w = np.asarray(w, dtype=np.float64)
    max_abs = np.abs(w.reshape(-1, w.shape[-1])).max(axis=0)
    scale = np.where(max_abs > 0, max_abs / 127.0, SCALE_FLOOR)
    qp = QuantParams(scale, 0)
    return quantize_affine(w, qp), qp


@dataclass(frozen=True, eq=False)
class RequantParams:
    """Fixed-point encoding of ``M = multiplier / 2**31 * 2**-shift`` (scalar or per channel)."""

    multiplier: np.ndarray
    shift: np.ndarray

    @property
    def real(self):
        return np.ldexp(np.asarray(self.multiplier, dtype=np.float64) / 2**31, -np.asarray(self.shift))

    def __eq__(self, other):
        return (
            isinstance(other, RequantParams)
            and np.array_equal(self.multiplier, other.multiplier)
            and np.array_equal(self.shift, other.shift)
        )


def requant_from_multiplier(m) -> RequantParams:
    m = np.asarray(m, dtype=np.float64)
    if np.any(~np.isfinite(m)) or np.any(m <= 0):
        raise InvalidQuantParams(f"requant multiplier must be finite and > 0, got {m}")
    frac, exp = np.frexp(m)
    mult = np.rint(np.ldexp(frac, 31)).astype(np.int64)
    # frac just below 1 can round up to 2**31
    carry = mult == 2**31
    mult = np.where(carry, 2**30, mult)
    shift = -(exp.astype(np.int64) + carry)
    return RequantParams(mult, shift)


def derive_requant(s_in, s_w, s_out) -> RequantParams:
    """Decompose ``s_in * s_w / s_out`` into a Q31 multiplier and right shift."""
    for name, s in (("s_in", s_in), ("s_w", s_w), ("s_out", s_out)):
        if np.any(np.asarray(s) <= 0):
            raise InvalidQuantParams(f"{name} must be > 0")
    return requant_from_multiplier(np.asarray(s_in, dtype=np.float64) * np.asarray(s_w) / np.asarray(s_out))


@dataclass(eq=False)
class QLayer:
    """One integer conv/dense: int8 weights, int32 bias, requant to ``out_edge``.

    ``channel_offset`` places the output inside a wider destination tensor
    (the two fire expands share one concatenated output edge).
    """

    name: str
    kind: str
    weights: np.ndarray
    weight_qp: QuantParams
    bias: np.ndarray
    requant: RequantParams
    in_edge: str
    out_edge: str
    relu: bool
    stride: int = 1
    padding: str = "valid"
    channel_offset: int = 0


@dataclass(eq=False)
class QuantizedModel:
    net_cfg: NetworkConfig
    layers: dict
    edges: dict

    @property
    def input_qp(self):
        return self.edges["input"]

    @property
    def output_edge(self):
        return self.net_cfg.nodes[-1].name

    @property
    def output_qp(self):
        return self.edges[self.output_edge]

    def bias_qp(self, layer_name):
        """Implied int32 bias params: scale ``s_in * s_w`` per channel, zero point 0."""
        layer = self.layers[layer_name]
        return QuantParams(self.edges[layer.in_edge].scale * layer.weight_qp.scale, 0)


def _bias_q(b, s_in, s_w):
    q = round_half_away(np.asarray(b, dtype=np.float64) / (s_in * s_w))
    return np.clip(q, INT32_MIN, INT32_MAX).astype(np.int32)


def quantize_model(net: Network, params, stats: CalibrationStats) -> QuantizedModel:
    def edge_qp(name):
        if name not in stats:
            raise CalibrationIncomplete(f"no calibration stats for edge {name!r}")
        return activation_qparams(stats[name].min, stats[name].max)

    def make_layer(key, kind, spec, in_edge, out_edge, offset=0):
        w_q, w_qp = quantize_weights(params[f"{key}.w"])
        s_in = edges[in_edge].scale
        s_out = edges[out_edge].scale
        return QLayer(
            name=key,
            kind=kind,
            weights=w_q,
            weight_qp=w_qp,
            bias=_bias_q(params[f"{key}.b"], s_in, w_qp.scale),
            requant=derive_requant(s_in, w_qp.scale, s_out),
            in_edge=in_edge,
            out_edge=out_edge,
            relu=spec.activation == "relu",
            stride=getattr(spec, "stride", 1),
            padding=getattr(spec, "padding", "valid"),
            channel_offset=offset,
        )

    edges = {"input": edge_qp("input")}
    layers = {}
    prev = "input"
    for node in net.nodes:
        spec, name = node.spec, node.name
        if isinstance(spec, Conv2D):
            edges[name] = edge_qp(name)
            layers[name] = make_layer(name, "conv", spec, prev, name)
        elif isinstance(spec, Fire):
            (_, sq), (_, e1), (_, e3) = spec.convs()
            sq_edge = f"{name}.squeeze"
            edges[sq_edge] = edge_qp(sq_edge)
            edges[name] = edge_qp(name)
            layers[sq_edge] = make_layer(sq_edge, "conv", sq, prev, sq_edge)
            layers[f"{name}.expand1x1"] = make_layer(f"{name}.expand1x1", "conv", e1, sq_edge, name, 0)
            layers[f"{name}.expand3x3"] = make_layer(f"{name}.expand3x3", "conv", e3, sq_edge, name, spec.expand_1x1)
        elif isinstance(spec, Dense):
            edges[name] = edge_qp(name)
            layers[name] = make_layer(name, "dense", spec, prev, name)
        else:
            # max/avg pooling, flatten and dropout keep their input's params
            edges[name] = edges[prev]
        prev = name
    return QuantizedModel(net.cfg, layers, edges)


def _fq_requant(y, out_qp, relu):
    q = round_half_away(y / out_qp.scale) + out_qp.zero_point
    lo = out_qp.zero_point if relu else INT8_MIN
    return np.clip(q, max(lo, INT8_MIN), INT8_MAX)


def fake_quant_forward(qmodel: QuantizedModel, x, return_codes=False):
    """Real-arithmetic simulation of the integer pipeline; returns p (or head int8 codes).

    Every layer runs on dequantized values in float64 and quantizes its
    output with the same rounding and clamping as the integer engine.
    """
    x = np.asarray(x)
    if x.ndim != 4 or tuple(x.shape[1:]) != qmodel.net_cfg.input_shape:
        raise ShapeMismatch(f"input shape {x.shape} does not match (N, {qmodel.net_cfg.input_shape})")
    codes = {"input": quantize_affine(x, qmodel.input_qp).astype(np.float64)}

    def real(edge):
        qp = qmodel.edges[edge]
        return qp.scale * (codes[edge] - qp.zero_point)

    def run(layer):
        w = layer.weight_qp.scale * layer.weights.astype(np.float64)
        b = qmodel.edges[layer.in_edge].scale * layer.weight_qp.scale * layer.bias.astype(np.float64)
        xin = real(layer.in_edge)
        if layer.kind == "conv":
            y, _ = F.conv2d(xin, w, b, layer.stride, layer.padding)
        else:
            y = xin @ w + b
        return _fq_requant(y, qmodel.edges[layer.out_edge], layer.relu)

    prev = "input"
    for node in qmodel.net_cfg.nodes:
        spec, name = node.spec, node.name
        if name in qmodel.layers:
            codes[name] = run(qmodel.layers[name])
        elif isinstance(spec, Fire):
            sq = f"{name}.squeeze"
            codes[sq] = run(qmodel.layers[sq])
            codes[name] = np.concatenate(
                [run(qmodel.layers[f"{name}.expand1x1"]), run(qmodel.layers[f"{name}.expand3x3"])], axis=-1
            )
        elif isinstance(spec, MaxPool):
            codes[name], _ = F.maxpool(codes[prev], spec.pool, spec.step)
        elif isinstance(spec, GlobalAvgPool):
            # input and output share params, so the real mean divided by the
            # scale is the mean of zero-point-shifted codes (exact in float64)
            qp = qmodel.edges[name]
            mean = (codes[prev] - qp.zero_point).mean(axis=(1, 2))
            codes[name] = np.clip(round_half_away(mean) + qp.zero_point, INT8_MIN, INT8_MAX)
        else:
            codes[name] = codes[prev].reshape(len(x), -1) if node.kind == "Flatten" else codes[prev]
        prev = name
    head = codes[prev].astype(np.int8)
    if return_codes:
        return head
    return expit(dequantize(head, qmodel.output_qp, np.float64)).reshape(-1)
