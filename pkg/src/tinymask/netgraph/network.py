"""Float32 network execution: parameter init, forward with activation record, backward."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, ShapeMismatch, StateError
from . import functional as F
from .layers import Conv2D, Dense, Dropout, Fire, Flatten, GlobalAvgPool, MaxPool, NetworkConfig


class Network:
    """A validated NetworkConfig plus its parameter layout.

    ``param_shapes`` maps parameter keys (``"<layer>.w"``, ``"<layer>.b"``)
    to shapes. Fire sub-convolutions are keyed ``"fire1.squeeze.w"`` etc.
    """

    def __init__(self, cfg: NetworkConfig):
        if not isinstance(cfg, NetworkConfig):
            raise ConfigError(f"expected NetworkConfig, got {type(cfg).__name__}")
        self.cfg = cfg
        self.nodes = cfg.nodes
        self.param_shapes = {}
        self._init_kind = {}
        for node in self.nodes:
            for key, conv, cin in _conv_units(node):
                self.param_shapes[f"{key}.w"] = (conv.kernel_h, conv.kernel_w, cin, conv.out_channels)
                self.param_shapes[f"{key}.b"] = (conv.out_channels,)
                self._init_kind[key] = conv.activation
            if isinstance(node.spec, Dense):
                self.param_shapes[f"{node.name}.w"] = (node.in_shape[0], node.spec.units)
                self.param_shapes[f"{node.name}.b"] = (node.spec.units,)
                self._init_kind[node.name] = node.spec.activation

    @property
    def input_shape(self):
        return self.cfg.input_shape

    def init_params(self, seed):
        rng = np.random.default_rng(seed)
        params = {}
        for key, act in self._init_kind.items():
            shape = self.param_shapes[f"{key}.w"]
            fan_in = int(np.prod(shape[:-1]))
            fan_out = shape[-1] * int(np.prod(shape[:-2])) if len(shape) == 4 else shape[-1]
            if act == "relu":
                limit = np.sqrt(6.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[f"{key}.w"] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
            params[f"{key}.b"] = np.zeros(shape[-1], dtype=np.float32)
        return params

    def check_params(self, params):
        for key, shape in self.param_shapes.items():
            if key not in params:
                raise ShapeMismatch(f"missing parameter {key}")
            if tuple(params[key].shape) != shape:
                raise ShapeMismatch(f"{key}: expected shape {shape}, got {params[key].shape}")


def _conv_units(node):
    """(param key, Conv2D, Cin) for every convolution a node owns."""
    spec = node.spec
    if isinstance(spec, Conv2D):
        return [(node.name, spec, node.in_shape[-1])]
    if isinstance(spec, Fire):
        sq, e1, e3 = spec.convs()
        return [
            (f"{node.name}.squeeze", sq[1], node.in_shape[-1]),
            (f"{node.name}.expand1x1", e1[1], spec.squeeze_1x1),
            (f"{node.name}.expand3x3", e3[1], spec.squeeze_1x1),
        ]
    return []


def build_network(cfg: NetworkConfig, seed: int = 0):
    net = Network(cfg)
    return net, net.init_params(seed)


@dataclass
class ActivationRecord:
    """Everything forward saw, enough for backward and calibration.

    ``edges`` maps edge names to activations: ``"input"``, every node name and
    ``"<fire>.squeeze"``. For a sigmoid head the edge holds the pre-sigmoid
    logit; ``p`` holds the probability.
    """

    net: Network
    mode: str
    edges: dict
    p: np.ndarray
    caches: list = field(repr=False, default_factory=list)


def _relu_conv(x, w, b, spec, cache_list):
    y, cache = F.conv2d(x, w, b, spec.stride, spec.padding)
    if spec.activation == "relu":
        y = np.maximum(y, 0)
    cache_list.append((cache, y))
    return y


def forward(net: Network, params, x, mode="infer", seed=0) -> ActivationRecord:
    """Run the float network. ``mode='train'`` enables inverted dropout seeded by ``seed``."""
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be train|infer, got {mode!r}")
    x = np.asarray(x)
    if x.ndim != 4 or tuple(x.shape[1:]) != net.input_shape:
        raise ShapeMismatch(f"input shape {x.shape} does not match (N, {net.input_shape})")
    dtype = params[next(iter(net.param_shapes))].dtype
    x = x.astype(dtype, copy=False)
    rng = np.random.default_rng(seed) if mode == "train" else None

    edges = {"input": x}
    caches = []
    h = x
    for node in net.nodes:
        spec = node.spec
        name = node.name
        if isinstance(spec, Conv2D):
            sub = []
            h = _relu_conv(h, params[f"{name}.w"], params[f"{name}.b"], spec, sub)
            caches.append(sub)
        elif isinstance(spec, Fire):
            sub = []
            (_, sq), (_, e1), (_, e3) = spec.convs()
            s = _relu_conv(h, params[f"{name}.squeeze.w"], params[f"{name}.squeeze.b"], sq, sub)
            edges[f"{name}.squeeze"] = s
            a = _relu_conv(s, params[f"{name}.expand1x1.w"], params[f"{name}.expand1x1.b"], e1, sub)
            c = _relu_conv(s, params[f"{name}.expand3x3.w"], params[f"{name}.expand3x3.b"], e3, sub)
            h = np.concatenate([a, c], axis=-1)
            caches.append(sub)
        elif isinstance(spec, MaxPool):
            h, cache = F.maxpool(h, spec.pool, spec.step)
            caches.append(cache)
        elif isinstance(spec, GlobalAvgPool):
            caches.append(h.shape)
            h = h.mean(axis=(1, 2))
        elif isinstance(spec, Flatten):
            caches.append(h.shape)
            h = h.reshape(h.shape[0], -1)
        elif isinstance(spec, Dense):
            z = h @ params[f"{name}.w"] + params[f"{name}.b"]
            caches.append(h)
            if spec.activation == "relu":
                h = np.maximum(z, 0)
            elif spec.activation == "sigmoid":
                edges[name] = z
                h = expit(z)
                continue
            else:
                h = z
        elif isinstance(spec, Dropout):
            if mode == "train":
                mask = (rng.random(h.shape) >= spec.rate).astype(h.dtype) / h.dtype.type(1.0 - spec.rate)
                caches.append(mask)
                h = h * mask
            else:
                caches.append(None)
        edges[name] = h
    return ActivationRecord(net, mode, edges, h.reshape(-1), caches)


def _relu_conv_backward(dy, w, spec, entry):
    cache, y = entry
    if spec.activation == "relu":
        dy = dy * (y > 0)
    return F.conv2d_backward(dy, cache, w)


def backward(net: Network, params, record: ActivationRecord, d_p):
    """Reverse-mode gradients of ``sum(d_p * p)`` with respect to every parameter."""
    if record.net is not net or len(record.caches) != len(net.nodes):
        raise StateError("activation record was not produced by this network")
    d_p = np.asarray(d_p, dtype=record.p.dtype).reshape(record.p.shape)
    grads = {}
    dh = None
    for node, cache in zip(reversed(net.nodes), reversed(record.caches)):
        spec = node.spec
        name = node.name
        if isinstance(spec, Dense):
            if spec.activation == "sigmoid":
                s = expit(record.edges[name])
                upstream = d_p.reshape(-1, 1) if dh is None else dh
                dz = upstream * s * (1 - s)
            elif spec.activation == "relu":
                dz = dh * (record.edges[name] > 0)
            else:
                dz = dh
            x_in = cache
            grads[f"{name}.w"] = x_in.T @ dz
            grads[f"{name}.b"] = dz.sum(axis=0)
            dh = dz @ params[f"{name}.w"].T
        elif isinstance(spec, Conv2D):
            dh, grads[f"{name}.w"], grads[f"{name}.b"] = _relu_conv_backward(dh, params[f"{name}.w"], spec, cache[0])
        elif isinstance(spec, Fire):
            (_, sq), (_, e1), (_, e3) = spec.convs()
            da, dc = dh[..., : spec.expand_1x1], dh[..., spec.expand_1x1 :]
            ds1, grads[f"{name}.expand1x1.w"], grads[f"{name}.expand1x1.b"] = _relu_conv_backward(
                da, params[f"{name}.expand1x1.w"], e1, cache[1]
            )
            ds3, grads[f"{name}.expand3x3.w"], grads[f"{name}.expand3x3.b"] = _relu_conv_backward(
                dc, params[f"{name}.expand3x3.w"], e3, cache[2]
            )
            dh, grads[f"{name}.squeeze.w"], grads[f"{name}.squeeze.b"] = _relu_conv_backward(
                ds1 + ds3, params[f"{name}.squeeze.w"], sq, cache[0]
            )
        elif isinstance(spec, MaxPool):
            dh = F.maxpool_backward(dh, cache)
        elif isinstance(spec, GlobalAvgPool):
            n, hh, ww, c = cache
            dh = np.broadcast_to(dh[:, None, None, :] / (hh * ww), cache).copy()
        elif isinstance(spec, Flatten):
            dh = dh.reshape(cache)
        elif isinstance(spec, Dropout):
            if cache is not None:
                dh = dh * cache
    return {k: grads[k] for k in net.param_shapes}
