#!/usr/bin/env python3
"""Convert a torchvision VGG16 state_dict into the SVCK container read by streakfix.

Only the feature-stage convolutions up to --last-layer are kept. Prints the
FNV-1a-64 checksum to put in the config as perceptual.checksum.
"""
import argparse
import json
import struct

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a_hex(data: bytes) -> str:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def load_state_dict(path):
    import torch

    sd = torch.load(path, map_location="cpu")
    if isinstance(sd, dict) and "state_dict" in sd:
        sd = sd["state_dict"]
    return {k: v.detach().numpy() for k, v in sd.items()}


def encode(tensors):
    # Tensor order follows std::map ordering on the C++ side: plain byte order.
    names = sorted(tensors)
    meta = {
        "arch": "vgg16-features",
        "widths": [],
        "seed": 0,
        "epoch": 0,
        "extra": {},
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
    }
    text = json.dumps(meta, separators=(",", ":"), sort_keys=True).encode()
    out = bytearray(b"SVCK")
    out += struct.pack("<II", 1, len(text))
    out += text
    for n in names:
        out += np.ascontiguousarray(tensors[n], dtype="<f4").tobytes()
    return bytes(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("state_dict", help="torchvision vgg16 .pth file")
    ap.add_argument("--out", required=True, help="output .ckpt path")
    ap.add_argument("--last-layer", type=int, default=16,
                    help="highest features.N index to keep (default 16)")
    args = ap.parse_args()

    sd = load_state_dict(args.state_dict)
    kept = {}
    for name, value in sd.items():
        parts = name.split(".")
        if len(parts) == 3 and parts[0] == "features" and int(parts[1]) <= args.last_layer:
            kept[name] = value.astype(np.float32)
    if not kept:
        raise SystemExit("no features.* tensors found")
    data = encode(kept)
    with open(args.out, "wb") as f:
        f.write(data)
    print(f"wrote {len(kept)} tensors to {args.out}")
    print(f"checksum {fnv1a_hex(data)}")


if __name__ == "__main__":
    main()
