#!/usr/bin/env python3
"""Convert the SBD release (dataset/cls/*.mat) into the layout lexseg reads.

    python tools/convert_sbd.py path/to/benchmark_RELEASE/dataset out/sbd

Writes out/sbd/index.txt (id<TAB>class,class), out/sbd/img/<id>.jpg and
out/sbd/masks/<class>/<id>.png with 0 for background and 255 for the class.
Needs scipy, numpy and pillow.
"""

import argparse
import shutil
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.io import loadmat

CLASSES = [
    "aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow",
    "diningtable", "dog", "horse", "motorbike", "person", "pottedplant", "sheep", "sofa",
    "train", "tvmonitor",
]


def segmentation(mat_path):
    gt = loadmat(mat_path, squeeze_me=True, struct_as_record=False)["GTcls"]
    return np.asarray(gt.Segmentation, dtype=np.uint8)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dataset", type=Path, help="SBD dataset/ directory containing cls/ and img/")
    ap.add_argument("out", type=Path)
    args = ap.parse_args()

    (args.out / "img").mkdir(parents=True, exist_ok=True)
    lines = []
    for mat in sorted((args.dataset / "cls").glob("*.mat")):
        image_id = mat.stem
        seg = segmentation(mat)
        present = [CLASSES[v - 1] for v in sorted(set(np.unique(seg)) - {0, 255})]
        if not present:
            continue
        for name in present:
            d = args.out / "masks" / name
            d.mkdir(parents=True, exist_ok=True)
            mask = (seg == CLASSES.index(name) + 1).astype(np.uint8) * 255
            Image.fromarray(mask, mode="L").save(d / f"{image_id}.png")
        src = args.dataset / "img" / f"{image_id}.jpg"
        if src.exists():
            shutil.copyfile(src, args.out / "img" / f"{image_id}.jpg")
        lines.append(f"{image_id}\t{','.join(present)}")
    (args.out / "index.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} images to {args.out}")


if __name__ == "__main__":
    main()
