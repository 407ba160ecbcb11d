#!/usr/bin/env python3
"""Convert the digit JSON files shipped by the npm `mnist` package into IDX files.

The package carries 10,000 MNIST digits stored per class as flat arrays of
intensities already divided by 255 and rounded to three decimals. Rounding
back with round(v * 255) recovers the original bytes. Samples are shuffled
with a fixed seed and split into train/test IDX pairs.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_npm_to_idx.py package/src/digits data --test 2000
"""
import argparse
import json
import struct
from pathlib import Path

import numpy as np


def write_images(path, images):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        fh.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 2049, len(labels)))
        fh.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    images, labels = [], []
    for digit in range(10):
        raw = np.asarray(json.loads((args.digits_dir / f"{digit}.json").read_text())["data"])
        block = np.rint(raw * 255.0).clip(0, 255).reshape(-1, 784)
        images.append(block)
        labels.append(np.full(len(block), digit))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    order = np.random.RandomState(args.seed).permutation(len(labels))
    images, labels = images[order], labels[order]
    n_train = len(labels) - args.test

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_images(args.out_dir / "train-images-idx3-ubyte", images[:n_train])
    write_labels(args.out_dir / "train-labels-idx1-ubyte", labels[:n_train])
    write_images(args.out_dir / "t10k-images-idx3-ubyte", images[n_train:])
    write_labels(args.out_dir / "t10k-labels-idx1-ubyte", labels[n_train:])
    print(f"train={n_train} test={args.test}")


if __name__ == "__main__":
    main()
