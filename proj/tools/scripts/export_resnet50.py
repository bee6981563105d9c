#!/usr/bin/env python3
# Copyright 2026 The aqop Authors
# SPDX-License-Identifier: Apache-2.0
"""Export ResNet50 weights to the aqop tensor-archive format.

The archive can then be passed as `imagenet_weights` in an experiment
config. By default the ImageNet-1K weights are fetched through torchvision;
pass --state-dict to convert a local .pth checkpoint instead (for example
the Beijing/Delhi contrastive checkpoints) without any network access.

Usage:
  python3 export_resnet50.py --out imagenet_resnet50.aqt
  python3 export_resnet50.py --state-dict weights.pth --out external.aqt
"""

import argparse
import binascii
import json
import struct

import torch

MAGIC = b"AQTENS1\n"

DTYPES = {
    torch.float32: "float32",
    torch.float64: "float64",
    torch.int64: "int64",
    torch.int32: "int32",
    torch.uint8: "uint8",
}


def write_archive(path, tensors, meta):
    entries = {}
    payload = bytearray()
    for name in sorted(tensors):
        t = tensors[name].detach().cpu().contiguous()
        raw = t.numpy().tobytes()
        entries[name] = {
            "shape": list(t.shape),
            "dtype": DTYPES[t.dtype],
            "offset": len(payload),
            "nbytes": len(raw),
        }
        payload += raw
    header = json.dumps(
        {"tensors": entries, "crc32": binascii.crc32(bytes(payload)), "meta": meta}
    ).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        f.write(payload)


def convert_state_dict(state):
    out = {}
    for name, tensor in state.items():
        if name.startswith("fc."):
            continue
        out["backbone." + name.replace("downsample.", "shortcut.")] = tensor
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="output archive path")
    ap.add_argument("--state-dict", help="local ResNet50 state dict (.pth) to convert")
    ap.add_argument("--tag", default="", help="free-form provenance tag stored in the archive")
    args = ap.parse_args()

    if args.state_dict:
        state = torch.load(args.state_dict, map_location="cpu", weights_only=True)
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        tag = args.tag or f"converted from {args.state_dict}"
    else:
        from torchvision.models import ResNet50_Weights, resnet50

        state = resnet50(weights=ResNet50_Weights.IMAGENET1K_V1).state_dict()
        tag = args.tag or "torchvision resnet50 IMAGENET1K_V1"

    tensors = convert_state_dict(state)
    conv1 = tensors["backbone.conv1.weight"]
    meta = {"kind": "backbone", "in_channels": int(conv1.shape[1]), "tag": tag}
    write_archive(args.out, tensors, meta)
    print(f"wrote {len(tensors)} tensors ({conv1.shape[1]}-channel conv1) to {args.out}")


if __name__ == "__main__":
    main()
