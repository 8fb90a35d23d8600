#!/usr/bin/env python3
"""Derive per-image FLOP and parameter counts for the default model registry.

Counts are taken from the torchvision residual-network definitions by
registering forward hooks on every conv/linear layer and walking a dummy
batch-1 input through the graph. FLOPs = 2 * MACs (one multiply + one add).
Parameter bytes assume 32-bit storage.

Run from the repo root; rewrites src/sweepbench/data/models.json.
"""

import json
from pathlib import Path

import torch
import torchvision.models as tvm

INPUT_SHAPE = (3, 224, 224)

# Per-image activation footprint used by the memory model. These are not
# operator-derived: they are calibrated so that activation growth stays a
# small fraction of the weight+runtime baseline (weights dominate footprint).
ACTIVATION_BYTES = {
    "resnet18": 262144,
    "resnet50": 458752,
    "resnet101": 524288,
}


def count_macs(model: torch.nn.Module) -> int:
    macs = 0

    def conv_hook(module, inputs, output):
        nonlocal macs
        out_elems = output.numel()  # batch 1
        kernel_ops = module.in_channels // module.groups
        for k in module.kernel_size:
            kernel_ops *= k
        macs += out_elems * kernel_ops

    def linear_hook(module, inputs, output):
        nonlocal macs
        macs += module.in_features * module.out_features

    handles = []
    for mod in model.modules():
        if isinstance(mod, torch.nn.Conv2d):
            handles.append(mod.register_forward_hook(conv_hook))
        elif isinstance(mod, torch.nn.Linear):
            handles.append(mod.register_forward_hook(linear_hook))
    with torch.no_grad():
        model(torch.zeros(1, *INPUT_SHAPE))
    for h in handles:
        h.remove()
    return macs


def main():
    out = {}
    for name, ctor in [
        ("resnet18", tvm.resnet18),
        ("resnet50", tvm.resnet50),
        ("resnet101", tvm.resnet101),
    ]:
        model = ctor(weights=None).eval()
        macs = count_macs(model)
        params = sum(p.numel() for p in model.parameters())
        out[name] = {
            "name": name,
            "flops_per_image": float(2 * macs),
            "param_bytes": params * 4,
            "activation_bytes_per_image": ACTIVATION_BYTES[name],
            "input_shape": list(INPUT_SHAPE),
        }
        print(f"{name}: {2 * macs / 1e9:.3f} GFLOP/img, {params / 1e6:.2f} M params")

    path = Path(__file__).resolve().parents[1] / "src" / "sweepbench" / "data" / "models.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
