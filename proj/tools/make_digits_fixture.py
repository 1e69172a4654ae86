#!/usr/bin/env python3
"""Writes an MNIST-format (IDX) digits fixture from scikit-learn's bundled
UCI handwritten digits: 8x8 images are bilinearly zoomed to 12x12 and padded
to 16x16 so they resemble downscaled MNIST digits (dark background, centered
stroke)."""
import struct
import sys
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits


def main(out_dir: Path) -> None:
    digits = load_digits()
    imgs = []
    for img in digits.images:
        z = ndimage.zoom(img / 16.0, 1.5, order=1)
        z = np.clip(z, 0.0, 1.0)
        z = np.pad(z, 2)
        imgs.append(np.floor(z * 255.0 + 0.5).astype(np.uint8))
    imgs = np.stack(imgs)
    labels = digits.target.astype(np.uint8)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, imgs.shape[0], 16, 16))
        f.write(imgs.tobytes())
    with open(out_dir / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.tobytes())


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "data/digits16"))
