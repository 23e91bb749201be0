"""Write the five interpolation variants of one synthetic face to a folder.

Run: python demos/resize_gallery.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from tinymask.datakit import augment_interpolation, resize, write_image
from tinymask.datakit.synth import synth_face

out = Path(sys.argv[1] if len(sys.argv) > 1 else "resize_gallery")
out.mkdir(parents=True, exist_ok=True)

# upsample a 32x32 face to 200x200 to mimic a camera frame, then shrink it back
face = resize(synth_face(np.random.default_rng(0), with_mask=True), (200, 200), "bicubic")
write_image(out / "source.png", face)
for method, img in augment_interpolation(face):
    write_image(out / f"{method}.png", img)
    diff = np.abs(img.astype(int) - resize(face, (32, 32), "area").astype(int)).mean()
    print(f"{method:9s} mean |diff| vs area: {diff:.2f}")
print("wrote", out)
