"""PNG / binary PPM decoding and directory ingestion."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DataError
from .manifest import CLASS_DIRS, DatasetManifest, Entry

IMAGE_SUFFIXES = {".png", ".ppm", ".pgm", ".pnm"}


def read_image(path) -> np.ndarray:
    """Decode to an (H, W, C) uint8 array with C in {1, 3}."""
    with Image.open(path) as im:
        if im.format not in ("PNG", "PPM"):
            raise DataError(f"{path}: unsupported format {im.format}")
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    return arr[:, :, None] if arr.ndim == 2 else arr


def write_image(path, img):
    img = np.asarray(img, dtype=np.uint8)
    Image.fromarray(img[:, :, 0] if img.shape[2] == 1 else img).save(path, format="PNG")


def load_dataset(root) -> DatasetManifest:
    """Scan ``root/mask`` and ``root/no_mask``; undecodable files land in ``skipped``."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: dataset root does not exist")
    entries, skipped = [], []
    for label in (1, 0):
        class_dir = root / CLASS_DIRS[label]
        if not class_dir.is_dir():
            raise DataError(f"{root}: missing class directory {CLASS_DIRS[label]!r}")
        n_before = len(entries)
        for path in sorted(p for p in class_dir.iterdir() if p.is_file()):
            if path.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            try:
                read_image(path)
            except (UnidentifiedImageError, OSError, DataError) as exc:
                skipped.append((path, str(exc)))
                continue
            entries.append(Entry(label, source=root.name, path=path))
        if len(entries) == n_before:
            raise DataError(f"{class_dir}: no readable images")
    return DatasetManifest(entries, skipped)
