#!/usr/bin/env python3
"""Write a saliency bundle (.wcam) from numpy arrays.

In a real exporter, `layers` comes from forward hooks (post-ReLU activations)
and backward hooks (gradients of the class logit) on the chosen conv layers.
This example fabricates small arrays so it runs with numpy alone:

    python3 tools/export_bundle_example.py out.wcam
    winsorcam compute out.wcam --out result/
"""

import argparse
import json
import struct

import numpy as np


def write_bundle(path, image, layers, class_index, logit, mask=None, extra=None):
    """image: C x H x W in [0, 1]; layers: list of (name, activation, gradient),
    each C_i x H_i x W_i, shallow to deep; mask: H x W of 0/1 or None."""
    manifest = {
        "format_version": 1,
        "kind": "saliency_bundle",
        "class_index": int(class_index),
        "logit": float(logit),
        "producer": "export_bundle_example.py",
        "capture": "post_relu",
        "image": {"blob": "image.bin", "shape": list(image.shape)},
        "layers": [],
    }
    manifest.update(extra or {})
    blobs = [("image.bin", image)]
    if mask is not None:
        manifest["mask"] = {"blob": "mask.bin", "shape": list(mask.shape)}
        blobs.append(("mask.bin", mask))
    for name, act, grad in layers:
        assert act.shape == grad.shape and act.ndim == 3
        manifest["layers"].append({"name": name, "shape": list(act.shape)})
        blobs.append((f"{name}/act.bin", act))
        blobs.append((f"{name}/grad.bin", grad))

    entries = [("manifest.json", json.dumps(manifest, indent=2).encode("utf-8"))]
    entries += [(name, np.ascontiguousarray(a, dtype="<f4").tobytes()) for name, a in blobs]
    with open(path, "wb") as f:
        f.write(b"WCAM" + struct.pack("<II", 1, len(entries)))
        for name, payload in entries:
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)) + raw + struct.pack("<Q", len(payload)) + payload)


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("out", help="output .wcam path")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    image = rng.uniform(0.0, 0.2, size=(3, 32, 32))
    image[:, 8:20, 10:22] = 0.9
    mask = np.zeros((32, 32))
    mask[8:20, 10:22] = 1.0

    layers = []
    for i, (c, s) in enumerate([(8, 32), (16, 16), (32, 8)]):
        act = np.maximum(rng.normal(size=(c, s, s)), 0.0)
        grad = rng.normal(loc=0.05, size=(c, s, s))
        layers.append((f"block{i + 1}", act, grad))

    write_bundle(args.out, image, layers, class_index=0, logit=1.0, mask=mask,
                 extra={"predicted_class": 0, "true_class": 0})


if __name__ == "__main__":
    main()
