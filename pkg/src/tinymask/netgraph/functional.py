"""Float forward/backward kernels on NHWC arrays (im2col based)."""
import numpy as np

from .layers import same_padding


def pad_amounts(h, w, kh, kw, stride, padding):
    if padding == "same":
        return same_padding(h, kh, stride), same_padding(w, kw, stride)
    return (0, 0), (0, 0)


def patches(xp, kh, kw, stride, ho, wo):
    """Gather (N, ho, wo, kh*kw*C) sliding windows; column order is (i, j, c)."""
    taps = [
        xp[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride, :]
        for i in range(kh)
        for j in range(kw)
    ]
    return np.concatenate(taps, axis=-1)


def conv2d(x, w, b, stride=1, padding="same", pad_value=0):
    """Cross-correlation of NHWC ``x`` with (kh, kw, Cin, Cout) ``w``.

    Returns the output and a cache for :func:`conv2d_backward`.
    """
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    (pt, pb), (pl, pr) = pad_amounts(h, wd, kh, kw, stride, padding)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)), constant_values=pad_value) if pt + pb + pl + pr else x
    ho = (xp.shape[1] - kh) // stride + 1
    wo = (xp.shape[2] - kw) // stride + 1
    cols = patches(xp, kh, kw, stride, ho, wo)
    y = cols.reshape(-1, kh * kw * cin) @ w.reshape(-1, cout)
    y = y.reshape(n, ho, wo, cout)
    if b is not None:
        y += b
    return y, (cols, x.shape, xp.shape, (pt, pl), stride)


def conv2d_backward(dy, cache, w):
    cols, x_shape, xp_shape, (pt, pl), stride = cache
    kh, kw, cin, cout = w.shape
    n, ho, wo, _ = dy.shape
    dy2 = dy.reshape(-1, cout)
    dw = (cols.reshape(-1, kh * kw * cin).T @ dy2).reshape(w.shape)
    db = dy2.sum(axis=0)
    dcols = (dy2 @ w.reshape(-1, cout).T).reshape(n, ho, wo, kh * kw, cin)
    dxp = np.zeros(xp_shape, dtype=dy.dtype)
    t = 0
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride, :] += dcols[:, :, :, t, :]
            t += 1
    dx = dxp[:, pt : pt + x_shape[1], pl : pl + x_shape[2], :]
    return dx, dw, db


def maxpool(x, pool, stride):
    n, h, w, c = x.shape
    ho = (h - pool) // stride + 1
    wo = (w - pool) // stride + 1
    windows = np.stack(
        [
            x[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride, :]
            for i in range(pool)
            for j in range(pool)
        ]
    )
    arg = windows.argmax(axis=0)
    y = np.take_along_axis(windows, arg[None], axis=0)[0]
    return y, (arg, x.shape, pool, stride)


def maxpool_backward(dy, cache):
    arg, x_shape, pool, stride = cache
    _, ho, wo, _ = dy.shape
    dx = np.zeros(x_shape, dtype=dy.dtype)
    t = 0
    for i in range(pool):
        for j in range(pool):
            dx[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride, :] += np.where(arg == t, dy, 0)
            t += 1
    return dx
