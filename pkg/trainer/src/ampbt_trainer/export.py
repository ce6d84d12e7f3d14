"""Writer for the AMPW0001 portable weights container.

Mirrors the inference-side format byte for byte: canonical JSON
descriptor (sorted keys, compact separators), tensor table sorted by
name, float32 data packed in table order. Batchnorm layers export their
running statistics; a model trained without them is refused.
"""

import json
import struct

import numpy as np

from .model import (ATTN_MID_DIVISOR, BACKBONE_CHANNELS, BN_EPS, KERNEL, POOL,
                    AmpbtNet, SpbtNet, _final_length)

MAGIC = b"AMPW0001"
VERSION = 1


class ExportError(Exception):
    pass


def build_descriptor(model) -> dict:
    attention = isinstance(model, AmpbtNet)
    feat = BACKBONE_CHANNELS[-1] * _final_length(model.input_length)
    return {
        "input_length": model.input_length,
        "input_channels": 2,
        "backbone_channels": list(BACKBONE_CHANNELS),
        "kernel_size": KERNEL,
        "pool": POOL,
        "attention": attention,
        "attn_mid_divisor": ATTN_MID_DIVISOR,
        "class_counts": list(model.class_counts),
        "bn_eps": BN_EPS,
        "input_norm": "max_abs",
        "head_input_dim": feat,
    }


def _bn_tensors(bn, prefix, out):
    if bn.running_mean is None or bn.running_var is None:
        raise ExportError(f"{prefix}: batchnorm has no running statistics to export")
    out[prefix + ".gamma"] = bn.weight.detach()
    out[prefix + ".beta"] = bn.bias.detach()
    out[prefix + ".mean"] = bn.running_mean.detach()
    out[prefix + ".var"] = bn.running_var.detach()


def collect_tensors(model) -> dict:
    out = {}
    for j, stage in enumerate(model.backbone):
        out[f"backbone.{j}.conv.weight"] = stage.conv.weight.detach()
        out[f"backbone.{j}.conv.bias"] = stage.conv.bias.detach()
        _bn_tensors(stage.bn, f"backbone.{j}.bn", out)
    if isinstance(model, AmpbtNet):
        for i, stream in enumerate(model.attn):
            for j, mod in enumerate(stream):
                p = f"tasks.{i}.attn.{j}"
                out[p + ".conv1.weight"] = mod.conv1.weight.detach()
                out[p + ".conv1.bias"] = mod.conv1.bias.detach()
                out[p + ".conv2.weight"] = mod.conv2.weight.detach()
                out[p + ".conv2.bias"] = mod.conv2.bias.detach()
                _bn_tensors(mod.bn1, p + ".bn1", out)
                _bn_tensors(mod.bn2, p + ".bn2", out)
    for i, head in enumerate(model.heads):
        out[f"heads.{i}.fc.weight"] = head.weight.detach()
        out[f"heads.{i}.fc.bias"] = head.bias.detach()
    return {k: v.cpu().numpy() for k, v in out.items()}


def export_weights(model, path):
    descriptor = build_descriptor(model)
    tensors = collect_tensors(model)
    for name, t in tensors.items():
        if not np.all(np.isfinite(t)):
            raise ExportError(f"tensor {name} contains NaN or Inf")
    desc_bytes = json.dumps(descriptor, sort_keys=True, separators=(",", ":")).encode()
    names = sorted(tensors)
    table = bytearray()
    data = bytearray()
    for name in names:
        t = np.ascontiguousarray(tensors[name], dtype="<f4")
        nb = name.encode()
        table += struct.pack("<H", len(nb)) + nb
        table += struct.pack("<BB", 0, t.ndim)
        table += struct.pack(f"<{t.ndim}I", *t.shape)
        table += struct.pack("<Q", len(data))
        data += t.tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(desc_bytes)))
        f.write(desc_bytes)
        f.write(struct.pack("<I", len(names)))
        f.write(table)
        f.write(data)
