#!/usr/bin/env python3
"""Convert per-digit JSON pixel dumps into gzipped IDX image/label files.

Input: a directory containing 0.json .. 9.json, each of the form
{"data": [p0, p1, ...]} where the flat list concatenates 28x28 grayscale
images with pixel values v/255 for the original byte v.

Output: <out>/digits-images-idx3-ubyte.gz and <out>/digits-labels-idx1-ubyte.gz
in the standard big-endian IDX layout, with samples shuffled by a fixed
seed so prefix subsets are class-mixed.

Usage: make_digit_idx.py <json_dir> <out_dir>
"""

import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

SIDE = 28
SHUFFLE_SEED = 0


def main() -> None:
    json_dir, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    images = []
    labels = []
    for digit in range(10):
        flat = json.loads((json_dir / f"{digit}.json").read_text())["data"]
        arr = np.asarray(flat, dtype=np.float64).reshape(-1, SIDE * SIDE)
        # pixels are stored as v/255 rounded to 3 decimals; recover the byte
        pix = np.rint(arr * 255.0).astype(np.uint8)
        images.append(pix)
        labels.append(np.full(pix.shape[0], digit, dtype=np.uint8))

    x = np.concatenate(images, axis=0)
    y = np.concatenate(labels, axis=0)
    order = np.random.default_rng(SHUFFLE_SEED).permutation(x.shape[0])
    x, y = x[order], y[order]

    # mtime=0 keeps the gzip output byte-reproducible
    with open(out_dir / "digits-images-idx3-ubyte.gz", "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(struct.pack(">IIII", 0x00000803, x.shape[0], SIDE, SIDE))
            f.write(x.tobytes())
    with open(out_dir / "digits-labels-idx1-ubyte.gz", "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(struct.pack(">II", 0x00000801, y.shape[0]))
            f.write(y.tobytes())

    counts = np.bincount(y, minlength=10)
    print(f"wrote {x.shape[0]} images, per-class counts {counts.tolist()}")


if __name__ == "__main__":
    main()
