"""Interpolation augmentation and seeded standard augmentation (flip, rotate, brightness)."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..tensor import round_half_away
from .manifest import DatasetManifest, Entry
from .resize import METHODS, resize

STANDARD_OPS = ("flip", "rotate", "brightness")
MAX_ROTATION_DEG = 15.0
MAX_BRIGHTNESS = 0.2


def augment_interpolation(img, size=(32, 32)):
    """One resized copy per interpolation method, as ``[(method, image), ...]``."""
    return [(m, resize(img, size, m)) for m in METHODS]


def _rotate(img, angle):
    out = ndimage.rotate(img.astype(np.float64), angle, axes=(1, 0), reshape=False, order=1, mode="reflect")
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)


def augment_standard(img, seed, ops_per_image=1, ops=STANDARD_OPS):
    """``ops_per_image`` seeded variants of ``img``.

    Each variant draws, in order: a horizontal flip with probability 1/2,
    a rotation uniform in +-15 degrees (bilinear, reflect padding) and a
    brightness factor uniform in [0.8, 1.2]. Ops not listed in ``ops`` are skipped.
    """
    if ops_per_image < 1:
        raise ValueError("ops_per_image must be >= 1")
    unknown = set(ops) - set(STANDARD_OPS)
    if unknown:
        raise ValueError(f"unknown augmentation ops {sorted(unknown)}")
    img = np.asarray(img, dtype=np.uint8)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(ops_per_image):
        # draw every parameter so disabling an op never shifts the others
        flip = rng.random() < 0.5
        angle = rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG)
        gain = rng.uniform(1 - MAX_BRIGHTNESS, 1 + MAX_BRIGHTNESS)
        v = img
        if "flip" in ops and flip:
            v = v[:, ::-1]
        if "rotate" in ops:
            v = _rotate(v, angle)
        if "brightness" in ops:
            v = np.clip(round_half_away(v * gain), 0, 255).astype(np.uint8)
        out.append(np.ascontiguousarray(v))
    return out


def augment_manifest(manifest: DatasetManifest, n_standard=0, seed=0, size=(32, 32), ops=STANDARD_OPS):
    """Standard-then-interpolation pipeline over a manifest.

    Every input yields ``(1 + n_standard) * 5`` entries: the original plus
    ``n_standard`` standard variants, each resized with all five methods.
    Output order follows manifest order.
    """
    entries = []
    for i, e in enumerate(manifest.entries):
        img = e.load()
        variants = [("orig", img)]
        if n_standard > 0:
            std = augment_standard(img, seed=(seed, i), ops_per_image=n_standard, ops=ops)
            variants += [(f"std{k}", v) for k, v in enumerate(std)]
        stem = e.path.stem if e.path is not None else f"img{i:06d}"
        for tag, v in variants:
            for method, r in augment_interpolation(v, size):
                entries.append(Entry(e.label, source=f"{stem}_{tag}_{method}", image=r))
    return DatasetManifest(entries)


def augmented_count(n_images, n_standard=0):
    return n_images * (1 + n_standard) * len(METHODS)
