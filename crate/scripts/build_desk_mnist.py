#!/usr/bin/env python3
"""Build the small MNIST subset under data/mnist-desk/ as gzipped IDX files.

Source: the npm package `mnist` 1.1.0, which redistributes 10 000 real MNIST
digits (1 000 per class) as 3-decimal grey levels. Grey levels are mapped back
to bytes with round(v * 255), which is exact at that precision.

The digits are shuffled with a fixed seed and split into 9 000 training and
1 000 test images (disjoint).

Usage:
  npm pack mnist@1.1.0
  python3 scripts/build_desk_mnist.py mnist-1.1.0.tgz data/mnist-desk
"""
import gzip
import json
import struct
import sys
import tarfile

import numpy as np

N_TEST = 1000


def write_idx(images_path, labels_path, images, labels):
    n = images.shape[0]
    with gzip.GzipFile(images_path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, n, 28, 28))
        f.write(images.astype(np.uint8).tobytes())
    with gzip.GzipFile(labels_path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, n))
        f.write(labels.astype(np.uint8).tobytes())


def npm_digits(tgz):
    images, labels = [], []
    with tarfile.open(tgz) as t:
        for d in range(10):
            raw = json.load(t.extractfile(f"package/src/digits/{d}.json"))["data"]
            px = np.rint(np.array(raw, dtype=np.float64) * 255.0).reshape(-1, 784)
            images.append(px)
            labels.append(np.full(px.shape[0], d))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(20190101).permutation(images.shape[0])
    return images[order], labels[order]


def main():
    tgz, out = sys.argv[1:3]
    x, y = npm_digits(tgz)
    n_train = x.shape[0] - N_TEST
    write_idx(f"{out}/train-images-idx3-ubyte.gz", f"{out}/train-labels-idx1-ubyte.gz", x[:n_train], y[:n_train])
    write_idx(f"{out}/t10k-images-idx3-ubyte.gz", f"{out}/t10k-labels-idx1-ubyte.gz", x[n_train:], y[n_train:])
    print(f"train {n_train}  test {N_TEST}")


if __name__ == "__main__":
    main()
