"""Tensor conventions and the affine int8 quantize/dequantize primitives.

Tensors are plain numpy arrays. Spatial activations use NHWC layout; once a
network flattens, activations are (N, features). Weight tensors keep the
output channel on the last axis: (kh, kw, Cin, Cout) for convolutions and
(in, out) for dense layers, which is also the per-channel quantization axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidQuantParams, ShapeMismatch

INT8_MIN, INT8_MAX = -128, 127
INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1

ELEM_KINDS = {"float32": np.float32, "int8": np.int8, "int32": np.int32}


def round_half_away(x):
    """Round to nearest integer, ties away from zero (float in, float out)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def check_tensor(t, elem_kind=None, ndim=None):
    """Validate a tensor's dtype and rank; returns it as an ndarray."""
    t = np.asarray(t)
    if ndim is not None and t.ndim != ndim:
        raise ShapeMismatch(f"expected rank {ndim}, got shape {t.shape}")
    if elem_kind is not None:
        want = ELEM_KINDS[elem_kind]
        if t.dtype != want:
            raise ShapeMismatch(f"expected {elem_kind} tensor, got {t.dtype}")
    return t


@dataclass(frozen=True, eq=False)
class QuantParams:
    """Affine map ``real = scale * (q - zero_point)``.

    A scalar ``scale`` is per-tensor. A 1-D ``scale`` is per-output-channel
    along the last axis and must be symmetric (``zero_point == 0``).
    """

    scale: float | np.ndarray
    zero_point: int = 0
    _per_channel: bool = field(init=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.scale, dtype=np.float64)
        if s.ndim > 1:
            raise InvalidQuantParams(f"scale must be scalar or 1-D, got shape {s.shape}")
        if s.size == 0 or not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise InvalidQuantParams(f"scale must be finite and > 0, got {self.scale!r}")
        zp = int(self.zero_point)
        if zp != self.zero_point or not INT8_MIN <= zp <= INT8_MAX:
            raise InvalidQuantParams(f"zero_point must be an int in [-128, 127], got {self.zero_point!r}")
        per_channel = s.ndim == 1
        if per_channel and zp != 0:
            raise InvalidQuantParams("per-channel quant params must be symmetric (zero_point 0)")
        object.__setattr__(self, "scale", s.copy() if per_channel else float(s))
        object.__setattr__(self, "zero_point", zp)
        object.__setattr__(self, "_per_channel", per_channel)

    @property
    def per_channel(self):
        return self._per_channel

    def __eq__(self, other):
        if not isinstance(other, QuantParams):
            return NotImplemented
        return (
            self.per_channel == other.per_channel
            and self.zero_point == other.zero_point
            and np.array_equal(self.scale, other.scale)
        )

    def __hash__(self):
        return hash((self.zero_point, np.asarray(self.scale).tobytes()))

    def _broadcast_scale(self, shape):
        if not self.per_channel:
            return self.scale
        if len(shape) < 2:
            raise ShapeMismatch("per-channel quant params need a weight tensor of rank >= 2")
        if shape[-1] != self.scale.shape[0]:
            raise ShapeMismatch(
                f"per-channel scale length {self.scale.shape[0]} != output channels {shape[-1]}"
            )
        return self.scale


def quantize_affine(t, qp: QuantParams) -> np.ndarray:
    """Quantize real values to int8: ``clamp(round(r / scale) + zp)``."""
    r = np.asarray(t, dtype=np.float64)
    scale = qp._broadcast_scale(r.shape)
    q = round_half_away(r / scale) + qp.zero_point
    return np.clip(q, INT8_MIN, INT8_MAX).astype(np.int8)


def dequantize(t, qp: QuantParams, dtype=np.float32) -> np.ndarray:
    """Map int8 codes back to reals: ``scale * (q - zp)``.

    ``dtype=np.float64`` skips the final float32 storage rounding.
    """
    q = np.asarray(t)
    if q.dtype != np.int8:
        raise ShapeMismatch(f"dequantize expects an int8 tensor, got {q.dtype}")
    scale = qp._broadcast_scale(q.shape)
    r = scale * (q.astype(np.float64) - qp.zero_point)
    return r.astype(dtype)


def representable_range(qp: QuantParams):
    """Real interval covered by int8 codes under ``qp`` (per-tensor only)."""
    return qp.scale * (INT8_MIN - qp.zero_point), qp.scale * (INT8_MAX - qp.zero_point)
