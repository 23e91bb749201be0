"""Desk-scale synthetic mask / no-mask faces for tests and demos."""
import numpy as np

from .manifest import MASK, NO_MASK, DatasetManifest, Entry

SKIN = np.array([[224, 172, 105], [198, 134, 66], [141, 85, 36], [255, 219, 172], [176, 120, 80]], dtype=np.float64)
MASK_COLORS = np.array([[160, 200, 230], [232, 234, 240], [100, 160, 210], [70, 120, 180]], dtype=np.float64)


def synth_face(rng, with_mask, size=32, noise=12.0):
    """One (size, size, 3) uint8 face-like image."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.empty((size, size, 3))
    img[:] = rng.uniform(20, 235, size=3)
    cy = size / 2 + rng.uniform(-2, 2)
    cx = size / 2 + rng.uniform(-2, 2)
    ry = size * rng.uniform(0.34, 0.40)
    rx = size * rng.uniform(0.26, 0.31)
    face = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    img[face] = SKIN[rng.integers(len(SKIN))] + rng.uniform(-15, 15, size=3)
    for side in (-1, 1):
        eye = ((yy - (cy - 0.3 * ry)) ** 2 + (xx - (cx + side * 0.4 * rx)) ** 2) <= 2.0
        img[eye] = (30, 25, 20)
    if with_mask:
        lower = face & (yy >= cy + rng.uniform(-0.5, 1.5)) & (np.abs(xx - cx) <= rx * 0.95)
        img[lower] = MASK_COLORS[rng.integers(len(MASK_COLORS))] + rng.uniform(-10, 10, size=3)
    else:
        mouth = (np.abs(yy - (cy + 0.5 * ry)) <= 0.8) & (np.abs(xx - cx) <= 0.35 * rx)
        img[mouth] = (150, 50, 50)
    img += rng.normal(0, noise, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def synth_dataset(n, seed=0) -> DatasetManifest:
    """``n`` images, half masked (label 1) and half not, interleaved by class."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be an even integer >= 2, got {n}")
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n):
        label = MASK if i % 2 == 0 else NO_MASK
        entries.append(Entry(label, source="synth", image=synth_face(rng, label == MASK)))
    return DatasetManifest(entries)
