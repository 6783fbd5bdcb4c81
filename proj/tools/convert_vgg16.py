#!/usr/bin/env python3
"""Convert Keras VGG16 convolution weights (HDF5) to a BIOM tensor file.

Usage:
  convert_vgg16.py vgg16_weights_tf_dim_ordering_tf_kernels_notop.h5 vgg16.biom

Keras kernels are [3, 3, in, out]; the extractor expects [out, in, 3, 3].
Both use cross-correlation and BGR input, so no flipping is needed. Use the
result with `extractor.channels = vgg16`, `extractor.preprocess = caffe` and
`extractor.source = file:vgg16.biom`.
"""

import argparse
import re
import struct
import sys

import h5py
import numpy as np

LAYER = re.compile(r"^block(\d+)_conv(\d+)$")


def conv_layers(h5):
    root = h5["model_weights"] if "model_weights" in h5 else h5
    names = [n for n in root.keys() if LAYER.match(n)]
    names.sort(key=lambda n: tuple(int(g) for g in LAYER.match(n).groups()))
    for name in names:
        kernel = bias = None

        def visit(_, obj):
            nonlocal kernel, bias
            if isinstance(obj, h5py.Dataset):
                if obj.ndim == 4:
                    kernel = np.asarray(obj, dtype=np.float32)
                elif obj.ndim == 1:
                    bias = np.asarray(obj, dtype=np.float32)

        root[name].visititems(visit)
        if kernel is None or bias is None:
            raise SystemExit(f"{name}: kernel or bias not found")
        yield name, kernel, bias


def write_biom(path, tensors):
    with open(path, "wb") as f:
        f.write(b"BIOM")
        f.write(struct.pack("<II", 1, len(tensors)))
        for name, arr in tensors:
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("h5")
    p.add_argument("out")
    args = p.parse_args()

    tensors = []
    with h5py.File(args.h5, "r") as h5:
        for i, (name, kernel, bias) in enumerate(conv_layers(h5)):
            if kernel.shape[:2] != (3, 3) or kernel.shape[3] != bias.shape[0]:
                raise SystemExit(f"{name}: unexpected kernel shape {kernel.shape}")
            tensors.append((f"extractor.conv{i}.weight", kernel.transpose(3, 2, 0, 1)))
            tensors.append((f"extractor.conv{i}.bias", bias))
            print(f"{name} -> extractor.conv{i} {kernel.shape[3]}x{kernel.shape[2]}x3x3")
    if not tensors:
        raise SystemExit("no blockN_convM layers found")
    write_biom(args.out, tensors)
    print(f"wrote {len(tensors) // 2} conv layers to {args.out}")


if __name__ == "__main__":
    sys.exit(main())
