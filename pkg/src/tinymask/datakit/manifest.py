"""Dataset manifests: labelled image entries, splitting and CSV export."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError

MASK, NO_MASK = 1, 0
CLASS_DIRS = {MASK: "mask", NO_MASK: "no_mask"}


@dataclass(frozen=True, eq=False)
class Entry:
    label: int
    source: str = ""
    path: Path | None = None
    image: np.ndarray | None = field(default=None, repr=False)

    def load(self):
        if self.image is not None:
            return self.image
        from .imageio import read_image

        return read_image(self.path)


@dataclass
class DatasetManifest:
    entries: list
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        for e in self.entries:
            if e.label not in (MASK, NO_MASK):
                raise DataError(f"label must be 0 or 1, got {e.label!r}")

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self):
        return np.array([e.label for e in self.entries], dtype=np.int64)

    @property
    def counts(self):
        """(mask, no_mask) counts."""
        labels = self.labels
        return int(np.sum(labels == MASK)), int(np.sum(labels == NO_MASK))

    def subset(self, indices):
        return DatasetManifest([self.entries[i] for i in indices])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "label", "class", "source", "path"])
        for i, e in enumerate(self.entries):
            w.writerow([i, e.label, CLASS_DIRS[e.label], e.source, "" if e.path is None else str(e.path)])
        return buf.getvalue()


def _val_quota(counts, val_fraction):
    """Per-class val sizes: ``floor(N * fraction)`` in total, shared by largest remainder.

    Ties go to the class listed first. Each class keeps at least one entry
    on both sides.
    """
    exact = np.array(counts, dtype=np.float64) * val_fraction
    total = int(np.floor(sum(counts) * val_fraction + 1e-9))
    quota = np.floor(exact + 1e-9).astype(int)
    extra = total - int(quota.sum())
    for i in sorted(range(len(counts)), key=lambda i: -(exact[i] - quota[i]))[:max(extra, 0)]:
        quota[i] += 1
    return [min(max(int(q), 1), c - 1) for q, c in zip(quota, counts)]


def split(manifest: DatasetManifest, val_fraction, seed=0):
    """Stratified seeded train/val partition; both halves keep manifest order."""
    if not 0 < val_fraction < 1:
        raise DataError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    rng = np.random.default_rng(seed)
    labels = manifest.labels
    per_class = [np.flatnonzero(labels == label) for label in (MASK, NO_MASK)]
    for label, idx in zip((MASK, NO_MASK), per_class):
        if len(idx) < 2:
            raise DataError(f"class {CLASS_DIRS[label]!r} has {len(idx)} samples; need at least 2 to split")
    val_idx = []
    for idx, n_val in zip(per_class, _val_quota([len(i) for i in per_class], val_fraction)):
        val_idx.extend(rng.permutation(idx)[:n_val].tolist())
    val_mask = np.zeros(len(labels), dtype=bool)
    val_mask[val_idx] = True
    return manifest.subset(np.flatnonzero(~val_mask)), manifest.subset(np.flatnonzero(val_mask))
