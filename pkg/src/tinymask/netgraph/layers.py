"""Declarative layer specs and network configs, with shape inference."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError


@dataclass(frozen=True)
class Conv2D:
    out_channels: int
    kernel_h: int = 3
    kernel_w: int = 3
    stride: int = 1
    padding: str = "same"
    activation: str = "relu"

    def validate(self):
        _positive(self, "out_channels", "kernel_h", "kernel_w", "stride")
        if self.padding not in ("same", "valid"):
            raise ConfigError(f"Conv2D padding must be same|valid, got {self.padding!r}")
        if self.activation not in ("relu", "none"):
            raise ConfigError(f"Conv2D activation must be relu|none, got {self.activation!r}")


@dataclass(frozen=True)
class MaxPool:
    pool: int = 2
    stride: int | None = None

    @property
    def step(self):
        return self.pool if self.stride is None else self.stride

    def validate(self):
        _positive(self, "pool")
        if self.stride is not None:
            _positive(self, "stride")


@dataclass(frozen=True)
class GlobalAvgPool:
    def validate(self):
        pass


@dataclass(frozen=True)
class Flatten:
    def validate(self):
        pass


@dataclass(frozen=True)
class Dense:
    units: int
    activation: str = "relu"

    def validate(self):
        _positive(self, "units")
        if self.activation not in ("relu", "sigmoid", "none"):
            raise ConfigError(f"Dense activation must be relu|sigmoid|none, got {self.activation!r}")


@dataclass(frozen=True)
class Dropout:
    rate: float = 0.2

    def validate(self):
        if not 0.0 < self.rate < 1.0:
            raise ConfigError(f"Dropout rate must be in (0, 1), got {self.rate}")


@dataclass(frozen=True)
class Fire:
    """SqueezeNet fire module: 1x1 squeeze, then parallel 1x1/3x3 expands concatenated."""

    squeeze_1x1: int
    expand_1x1: int
    expand_3x3: int

    def validate(self):
        _positive(self, "squeeze_1x1", "expand_1x1", "expand_3x3")

    def convs(self):
        """The three relu convolutions as (suffix, Conv2D) pairs."""
        return (
            ("squeeze", Conv2D(self.squeeze_1x1, 1, 1)),
            ("expand1x1", Conv2D(self.expand_1x1, 1, 1)),
            ("expand3x3", Conv2D(self.expand_3x3, 3, 3)),
        )


LAYER_TYPES = {cls.__name__: cls for cls in (Conv2D, MaxPool, GlobalAvgPool, Flatten, Dense, Dropout, Fire)}


def _positive(spec, *names):
    for name in names:
        v = getattr(spec, name)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{type(spec).__name__}.{name} must be an integer >= 1, got {v!r}")


def conv_output_hw(h, w, kh, kw, stride, padding):
    if padding == "same":
        return math.ceil(h / stride), math.ceil(w / stride)
    return (h - kh) // stride + 1, (w - kw) // stride + 1


def same_padding(size, k, stride):
    """(before, after) padding for TF-style 'same' convolution along one axis."""
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


@dataclass(frozen=True)
class Node:
    """One executable layer instance with resolved shapes (batch axis omitted)."""

    name: str
    spec: object
    in_shape: tuple
    out_shape: tuple

    @property
    def kind(self):
        return type(self.spec).__name__


@dataclass(frozen=True)
class NetworkConfig:
    input_shape: tuple
    layers: tuple
    name: str = "network"
    nodes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "nodes", tuple(infer_shapes(self)))

    def to_dict(self):
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [{"type": type(l).__name__, **asdict(l)} for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            layers = []
            for entry in d["layers"]:
                entry = dict(entry)
                kind = entry.pop("type")
                if kind not in LAYER_TYPES:
                    raise ConfigError(f"unknown layer type {kind!r}")
                lcls = LAYER_TYPES[kind]
                known = {f.name for f in fields(lcls)}
                extra = set(entry) - known
                if extra:
                    raise ConfigError(f"{kind}: unknown keys {sorted(extra)}")
                layers.append(lcls(**entry))
            return cls(tuple(d["input_shape"]), tuple(layers), d.get("name", "network"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed network config: {exc}") from exc

    def param_layers(self):
        return [n for n in self.nodes if n.kind in ("Conv2D", "Dense", "Fire")]


def infer_shapes(cfg: NetworkConfig):
    """Resolve every layer's input/output shape; raises ConfigError if impossible."""
    if len(cfg.input_shape) != 3 or min(cfg.input_shape) < 1:
        raise ConfigError(f"input_shape must be positive (H, W, C), got {cfg.input_shape}")
    if not cfg.layers:
        raise ConfigError("network has no layers")
    last = cfg.layers[-1]
    if not (isinstance(last, Dense) and last.units == 1 and last.activation == "sigmoid"):
        raise ConfigError("final layer must be Dense(units=1, activation='sigmoid')")

    counters = {}
    nodes = []
    shape = cfg.input_shape
    for spec in cfg.layers:
        if type(spec) not in LAYER_TYPES.values():
            raise ConfigError(f"not a layer spec: {spec!r}")
        spec.validate()
        kind = type(spec).__name__
        counters[kind] = counters.get(kind, 0) + 1
        name = f"{kind.lower()}{counters[kind]}"
        out = _out_shape(spec, shape, name)
        if min(out) < 1:
            raise ConfigError(f"{name}: non-positive output shape {out} from input {shape}")
        nodes.append(Node(name, spec, shape, out))
        shape = out
    return nodes


def _out_shape(spec, shape, name):
    if isinstance(spec, (Conv2D, Fire, MaxPool, GlobalAvgPool)) and len(shape) != 3:
        raise ConfigError(f"{name}: needs a spatial (H, W, C) input, got {shape}")
    if isinstance(spec, Conv2D):
        h, w, _ = shape
        if spec.padding == "valid" and (spec.kernel_h > h or spec.kernel_w > w):
            raise ConfigError(f"{name}: kernel larger than input {shape}")
        return (*conv_output_hw(h, w, spec.kernel_h, spec.kernel_w, spec.stride, spec.padding), spec.out_channels)
    if isinstance(spec, Fire):
        h, w, _ = shape
        return (h, w, spec.expand_1x1 + spec.expand_3x3)
    if isinstance(spec, MaxPool):
        h, w, c = shape
        if spec.pool > h or spec.pool > w:
            raise ConfigError(f"{name}: pool window {spec.pool} larger than input {shape}")
        return ((h - spec.pool) // spec.step + 1, (w - spec.pool) // spec.step + 1, c)
    if isinstance(spec, GlobalAvgPool):
        return (shape[2],)
    if isinstance(spec, Flatten):
        return (math.prod(shape),)
    if isinstance(spec, Dense):
        if len(shape) != 1:
            raise ConfigError(f"{name}: Dense needs a flat input, got {shape}; add Flatten")
        return (spec.units,)
    return shape  # Dropout


def conv_params(kh, kw, cin, cout):
    return (kh * kw * cin + 1) * cout


def param_count(cfg: NetworkConfig) -> int:
    """Trainable parameter count (weights plus biases)."""
    total = 0
    for node in cfg.nodes:
        spec = node.spec
        if isinstance(spec, Conv2D):
            total += conv_params(spec.kernel_h, spec.kernel_w, node.in_shape[-1], spec.out_channels)
        elif isinstance(spec, Dense):
            total += (node.in_shape[0] + 1) * spec.units
        elif isinstance(spec, Fire):
            cin = node.in_shape[-1]
            total += conv_params(1, 1, cin, spec.squeeze_1x1)
            total += conv_params(1, 1, spec.squeeze_1x1, spec.expand_1x1)
            total += conv_params(3, 3, spec.squeeze_1x1, spec.expand_3x3)
    return total
