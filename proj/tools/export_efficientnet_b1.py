#!/usr/bin/env python3
"""Export Keras EfficientNet-B1 (no top) into a neuroscan tensor archive.

The archive is what `train --backbone pretrained_b1 --backbone-weights <file>`
expects. With --weights random the network is randomly initialised (batch-norm
statistics included), which is useful for checking the C++ port without a
download. --probe additionally stores a random [0,1] input and the Keras
features for it under "probe.input" and "probe.features".
"""

import argparse
import math
import struct
import sys

import numpy as np

MAGIC = b"NSTENSR1"


def write_archive(path, tensors):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors:
            arr = np.ascontiguousarray(arr, dtype="<f4")
            shape = list(arr.shape) + [1] * (4 - arr.ndim)
            encoded = name.encode()
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<4i", *shape))
            f.write(arr.tobytes())


def conv_kernel(k):
    # Keras (kh, kw, in, out) -> (out, in, kh, kw)
    return k.transpose(3, 2, 0, 1)


def depthwise_kernel(k):
    # Keras (kh, kw, channels, 1) -> (channels, 1, kh, kw)
    return k.transpose(2, 3, 0, 1)


def column(v):
    return v.reshape(-1, 1, 1, 1)


def randomize(model, rng):
    import tensorflow as tf

    for layer in model.layers:
        if isinstance(layer, tf.keras.layers.BatchNormalization):
            gamma, beta, mean, var = layer.get_weights()
            layer.set_weights([
                rng.uniform(0.5, 1.5, gamma.shape).astype("f4"),
                rng.uniform(-0.1, 0.1, beta.shape).astype("f4"),
                rng.uniform(-0.1, 0.1, mean.shape).astype("f4"),
                rng.uniform(0.5, 1.5, var.shape).astype("f4"),
            ])


def collect(model):
    import tensorflow as tf

    tensors = []
    layers = {layer.name: layer for layer in model.layers}

    norm = next(l for l in model.layers if isinstance(l, tf.keras.layers.Normalization))
    mean = np.asarray(norm.mean, dtype="f4").reshape(-1)
    variance = np.asarray(norm.variance, dtype="f4").reshape(-1)
    scale = np.ones(3, dtype="f4")
    # The imagenet model rescales by 1/sqrt(stddev) after normalizing.
    rescales = [l for l in model.layers if isinstance(l, tf.keras.layers.Rescaling)]
    if len(rescales) > 1:
        scale = np.asarray(rescales[-1].scale, dtype="f4").reshape(-1) * np.ones(3, dtype="f4")
    tensors += [("preprocess.mean", column(mean)), ("preprocess.variance", column(variance)),
                ("preprocess.scale", column(scale))]

    for name, layer in layers.items():
        w = layer.get_weights()
        if isinstance(layer, tf.keras.layers.BatchNormalization):
            tensors += [(name + ".gamma", column(w[0])), (name + ".beta", column(w[1])),
                        (name + ".running_mean", column(w[2])), (name + ".running_var", column(w[3]))]
        elif isinstance(layer, tf.keras.layers.DepthwiseConv2D):
            tensors.append((name + ".weight", depthwise_kernel(w[0])))
        elif isinstance(layer, tf.keras.layers.Conv2D):
            tensors.append((name + ".weight", conv_kernel(w[0])))
            if len(w) > 1:
                tensors.append((name + ".bias", column(w[1])))
    return tensors


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="archive path")
    ap.add_argument("--weights", choices=["imagenet", "random"], default="imagenet")
    ap.add_argument("--size", type=int, default=224, help="square input side used to build the model")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--probe", action="store_true", help="store a probe input and the Keras features")
    args = ap.parse_args()

    try:
        import tensorflow as tf
    except ImportError:
        print("tensorflow is required for the export", file=sys.stderr)
        return 3

    tf.keras.utils.set_random_seed(args.seed)
    model = tf.keras.applications.EfficientNetB1(
        include_top=False, weights=None if args.weights == "random" else "imagenet",
        input_shape=(args.size, args.size, 3))
    rng = np.random.default_rng(args.seed)
    if args.weights == "random":
        randomize(model, rng)
        norm = next(l for l in model.layers if isinstance(l, tf.keras.layers.Normalization))
        norm.set_weights([w if w.ndim == 0 else
                          (rng.uniform(0.3, 0.6, w.shape) if i == 0 else rng.uniform(0.04, 0.09, w.shape)).astype("f4")
                          for i, w in enumerate(norm.get_weights())])

    tensors = collect(model)
    if args.probe:
        x = rng.uniform(0.0, 1.0, (1, args.size, args.size, 3)).astype("f4")
        y = model(x * 255.0, training=False).numpy()
        tensors.append(("probe.input", x.transpose(0, 3, 1, 2)))
        tensors.append(("probe.features", y.transpose(0, 3, 1, 2)))
    write_archive(args.out, tensors)
    print(f"wrote {len(tensors)} tensors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
