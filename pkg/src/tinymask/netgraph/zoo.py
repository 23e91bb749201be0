"""Reference architectures: the tiny mask classifier and two SqueezeNet variants."""
import json
from pathlib import Path

from ..errors import ConfigError, NotFound
from .layers import Conv2D, Dense, Dropout, Fire, Flatten, GlobalAvgPool, MaxPool, NetworkConfig

INPUT_SHAPE = (32, 32, 3)
DROPOUT_RATE = 0.2


def tinymask_ref(input_shape=INPUT_SHAPE, dropout=DROPOUT_RATE):
    # 3x3 conv stack sized to exactly 128,193 trainable parameters at 32x32x3
    layers = [
        Conv2D(64), Dropout(dropout), MaxPool(2),
        Conv2D(32), Dropout(dropout), MaxPool(2),
        Conv2D(32), Dropout(dropout), MaxPool(2),
        Flatten(),
        Dense(192, "relu"), Dropout(dropout),
        Dense(1, "sigmoid"),
    ]
    return NetworkConfig(input_shape, layers, "tinymask-ref")


_SQUEEZE_FIRES = [
    (16, 64, 64), (16, 64, 64), (32, 128, 128),
    (32, 128, 128), (48, 192, 192), (48, 192, 192), (64, 256, 256),
    (64, 256, 256),
]


def squeezenet_mask(input_shape=INPUT_SHAPE):
    """SqueezeNet v1.0 fire layout adapted to 32x32 inputs with a binary head.

    The stem is a stride-1 3x3 conv (a 7x7/2 stem would collapse a 32x32 input
    before the last fire block), and the 1000-way conv classifier is replaced
    by global average pooling into Dense(1, sigmoid).
    """
    layers = [Conv2D(96, 3, 3), MaxPool(2)]
    # pools after fire4 and fire8, as in the original
    for i, f in enumerate(_SQUEEZE_FIRES, start=2):
        layers.append(Fire(*f))
        if i in (4, 8):
            layers.append(MaxPool(2))
    layers += [Dropout(0.5), GlobalAvgPool(), Dense(1, "sigmoid")]
    return NetworkConfig(input_shape, layers, "squeezenet-mask")


def squeezenet_mask_small(input_shape=INPUT_SHAPE):
    """squeezenet-mask with its last two fire modules dropped."""
    layers = list(squeezenet_mask(input_shape).layers)
    fire_idx = [i for i, l in enumerate(layers) if isinstance(l, Fire)]
    for i in reversed(fire_idx[-2:]):
        del layers[i]
    return NetworkConfig(input_shape, layers, "squeezenet-mask-small")


ZOO = {
    "tinymask-ref": tinymask_ref,
    "squeezenet-mask": squeezenet_mask,
    "squeezenet-mask-small": squeezenet_mask_small,
}


def zoo(name, input_shape=INPUT_SHAPE) -> NetworkConfig:
    try:
        factory = ZOO[name]
    except KeyError:
        raise NotFound(f"unknown architecture {name!r}; known: {sorted(ZOO)}") from None
    return factory(input_shape)


def fire_count(cfg):
    return sum(isinstance(l, Fire) for l in cfg.layers)


def load_config(path) -> NetworkConfig:
    """Read a JSON network config file (see docs/config-format.md)."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return NetworkConfig.from_dict(data)


def save_config(cfg: NetworkConfig, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def resolve_arch(arch, input_shape=INPUT_SHAPE) -> NetworkConfig:
    """Zoo name or path to a config file."""
    if arch in ZOO:
        return zoo(arch, input_shape)
    path = Path(arch)
    if path.is_file():
        return load_config(path)
    raise NotFound(f"{arch!r} is neither a zoo architecture nor a config file")
