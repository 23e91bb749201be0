"""Integer-only kernels: int8 in, int32 accumulate, fixed-point requantize, int8 out.

Requantization rule, shared with the fake-quant oracle: for accumulator ``a``
and channel params ``(m, n)`` the output is ``round_half_away(a * m / 2**(31 + n))``
computed exactly in 64-bit integers, then ``+ zp_out`` and clamped to
``[zp_out if relu else -128, 127]``.
"""
import numpy as np

from ..errors import UnsupportedShape
from ..netgraph.functional import pad_amounts
from ..tensor import INT8_MAX, INT8_MIN, INT32_MAX, INT32_MIN

# 255 * 127 * 2**16 < 2**31: a window this large cannot overflow int32
MAX_ACCUM_TERMS = 2**16


def _check_int8(x, what):
    if x.dtype != np.int8:
        raise TypeError(f"{what} must be int8, got {x.dtype}")


def rounding_shift(prod, total_shift):
    """``round_half_away(prod / 2**total_shift)`` for int64 ``prod``, ``total_shift`` >= 1."""
    total_shift = np.minimum(total_shift, 63)
    mag = (np.abs(prod) + (np.int64(1) << (total_shift - 1))) >> total_shift
    return np.where(prod < 0, -mag, mag)


def requantize(acc, multiplier, shift, zp_out, relu=False):
    """int32 accumulators -> int8 via the Q31 multiplier and per-channel shift."""
    acc = np.asarray(acc, dtype=np.int64)
    prod = acc * np.asarray(multiplier, dtype=np.int64)
    total = 31 + np.asarray(shift, dtype=np.int64)
    if np.any(total < 1):
        raise UnsupportedShape("requant multiplier >= 2**30 is not supported")
    out = rounding_shift(prod, total) + zp_out
    lo = max(zp_out, INT8_MIN) if relu else INT8_MIN
    return np.clip(out, lo, INT8_MAX).astype(np.int8)


def _accumulate(cols, w, bias):
    acc = cols @ w.astype(np.int64) + bias.astype(np.int64)
    if acc.size and (acc.max() > INT32_MAX or acc.min() < INT32_MIN):
        raise UnsupportedShape("int32 accumulator overflow")
    return acc


def conv2d_i8(x, weights, bias, zp_in, zp_out, multiplier, shift, stride=1, padding="same", relu=False):
    """NHWC int8 convolution with (kh, kw, Cin, Cout) int8 weights and int32 bias."""
    _check_int8(x, "input")
    _check_int8(weights, "weights")
    n, h, w, cin = x.shape
    kh, kw, wcin, cout = weights.shape
    if wcin != cin:
        raise UnsupportedShape(f"weights expect {wcin} input channels, got {cin}")
    if kh * kw * cin > MAX_ACCUM_TERMS:
        raise UnsupportedShape(f"window of {kh * kw * cin} terms risks int32 overflow (limit {MAX_ACCUM_TERMS})")
    (pt, pb), (pl, pr) = pad_amounts(h, w, kh, kw, stride, padding)
    # subtract the zero point first so padding with 0 means real 0
    xc = x.astype(np.int32) - np.int32(zp_in)
    if pt + pb + pl + pr:
        xc = np.pad(xc, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    ho = (xc.shape[1] - kh) // stride + 1
    wo = (xc.shape[2] - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise UnsupportedShape(f"kernel {kh}x{kw} larger than padded input {xc.shape[1:3]}")
    taps = [
        xc[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride, :]
        for i in range(kh)
        for j in range(kw)
    ]
    cols = np.concatenate(taps, axis=-1).reshape(-1, kh * kw * cin).astype(np.int64)
    acc = _accumulate(cols, weights.reshape(-1, cout), bias)
    return requantize(acc, multiplier, shift, zp_out, relu).reshape(n, ho, wo, cout)


def dense_i8(x, weights, bias, zp_in, zp_out, multiplier, shift, relu=False):
    """(N, in) int8 activations times (in, out) int8 weights."""
    _check_int8(x, "input")
    _check_int8(weights, "weights")
    if x.shape[-1] != weights.shape[0]:
        raise UnsupportedShape(f"dense expects {weights.shape[0]} inputs, got {x.shape[-1]}")
    if weights.shape[0] > MAX_ACCUM_TERMS:
        raise UnsupportedShape("dense fan-in risks int32 overflow")
    xc = x.astype(np.int64) - zp_in
    acc = _accumulate(xc, weights, bias)
    return requantize(acc, multiplier, shift, zp_out, relu)


def maxpool_i8(x, pool, stride=None):
    """Window max; quant params pass through unchanged."""
    _check_int8(x, "input")
    stride = pool if stride is None else stride
    n, h, w, c = x.shape
    if pool > h or pool > w:
        raise UnsupportedShape(f"pool window {pool} larger than input {h}x{w}")
    ho = (h - pool) // stride + 1
    wo = (w - pool) // stride + 1
    out = None
    for i in range(pool):
        for j in range(pool):
            tap = x[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride, :]
            out = tap.copy() if out is None else np.maximum(out, tap)
    return out


def global_avgpool_i8(x, zp):
    """Mean over H and W with round-half-away, in the input's quant params."""
    _check_int8(x, "input")
    n, h, w, c = x.shape
    count = h * w
    s = (x.astype(np.int64) - zp).sum(axis=(1, 2))
    mag = (2 * np.abs(s) + count) // (2 * count)
    out = np.where(s < 0, -mag, mag) + zp
    return np.clip(out, INT8_MIN, INT8_MAX).astype(np.int8)
