"""Dataset ingestion, resizing, augmentation, splitting and synthetic data."""
import numpy as np

from .augment import STANDARD_OPS, augment_interpolation, augment_manifest, augment_standard, augmented_count
from .imageio import load_dataset, read_image, write_image
from .manifest import CLASS_DIRS, MASK, NO_MASK, DatasetManifest, Entry, split
from .resize import METHODS, resize
from .synth import synth_dataset


def normalize(images):
    """uint8 pixels -> float32 in [0, 1]; the one normalization used for training and inference."""
    return np.asarray(images, dtype=np.float32) / np.float32(255.0)


def to_arrays(manifest, size=(32, 32), method="area"):
    """Stack a manifest into (normalized NHWC float32 images, int labels).

    Images not already at ``size`` are resized with ``method``.
    """
    imgs = []
    for e in manifest.entries:
        img = e.load()
        if img.shape[:2] != tuple(size):
            img = resize(img, size, method)
        imgs.append(img)
    return normalize(np.stack(imgs)), manifest.labels


__all__ = [
    "CLASS_DIRS", "DatasetManifest", "Entry", "MASK", "METHODS", "NO_MASK", "STANDARD_OPS",
    "augment_interpolation", "augment_manifest", "augment_standard", "augmented_count",
    "load_dataset", "normalize", "read_image", "resize", "split", "synth_dataset",
    "to_arrays", "write_image",
]
