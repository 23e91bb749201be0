"""Network descriptions, float execution and the reference architectures."""
from .layers import (
    Conv2D,
    Dense,
    Dropout,
    Fire,
    Flatten,
    GlobalAvgPool,
    MaxPool,
    NetworkConfig,
    Node,
    param_count,
)
from .network import ActivationRecord, Network, backward, build_network, forward
from .zoo import ZOO, fire_count, load_config, resolve_arch, save_config, zoo

__all__ = [
    "ActivationRecord", "Conv2D", "Dense", "Dropout", "Fire", "Flatten", "GlobalAvgPool",
    "MaxPool", "Network", "NetworkConfig", "Node", "ZOO", "backward", "build_network",
    "fire_count", "forward", "load_config", "param_count", "resolve_arch", "save_config", "zoo",
]
