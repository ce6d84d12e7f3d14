"""Deterministic forward pass of the multi-task beam-parameter classifier.

Architecture (all 1D):

  * shared backbone: 3 x [conv(k=3, pad=1) -> batchnorm -> relu ->
    maxpool(2, 2)], channels 2 -> 64 -> 128 -> 256, so an input of
    length 255 shrinks 255 -> 127 -> 63 -> 31;
  * per task, 3 attention modules aligned with the backbone stages:
    module j sees concat(F_j, pooled task features from stage j-1)
    (F_j alone at j = 1), applies 1x1 conv -> bn -> relu, then
    1x1 conv -> bn -> sigmoid to produce a mask the size of F_j, and
    multiplies it onto F_j;
  * per task, one fully-connected head over the flattened stage-3
    task features, followed by softmax.

Weights travel in a little-endian container (magic ``AMPW0001``): a
JSON architecture descriptor, a tensor table, and raw float32 data.
Single-task variants (no attention streams, one head) use the same
container with ``attention: false``.

The backbone parameter count follows C_in*C_out*k + C_out per conv and
2*C_out per batchnorm; at the default dims it totals 124,608.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadMagicError, BadShapeError, BadVersionError, InputError,
                     NonFiniteTensorError, ParameterError, TruncatedFileError)

WEIGHTS_MAGIC = b"AMPW0001"
WEIGHTS_VERSION = 1

DEFAULT_DESCRIPTOR = {
    "input_length": 255,
    "input_channels": 2,
    "backbone_channels": [64, 128, 256],
    "kernel_size": 3,
    "pool": 2,
    "attention": True,
    "attn_mid_divisor": 4,
    "class_counts": [255, 10, 51],
    "bn_eps": 1e-5,
    "input_norm": "max_abs",
}


def make_descriptor(input_length, class_counts, attention=True, **overrides):
    d = dict(DEFAULT_DESCRIPTOR)
    d["input_length"] = int(input_length)
    d["class_counts"] = [int(c) for c in class_counts]
    d["attention"] = bool(attention)
    d.update(overrides)
    d["head_input_dim"] = head_input_dim(d)
    return d


def stage_lengths(descriptor):
    """Feature lengths after each backbone stage (post-pool)."""
    n = descriptor["input_length"]
    pool = descriptor["pool"]
    out = []
    for _ in descriptor["backbone_channels"]:
        n = n // pool
        out.append(n)
    return out

def head_input_dim(descriptor):
    return descriptor["backbone_channels"][-1] * stage_lengths(descriptor)[-1]


def expected_tensor_shapes(descriptor):
    """name -> shape for every tensor the container must hold."""
    chans = [descriptor["input_channels"]] + list(descriptor["backbone_channels"])
    k = descriptor["kernel_size"]
    shapes = {}
    for j in range(len(descriptor["backbone_channels"])):
        cin, cout = chans[j], chans[j + 1]
        shapes[f"backbone.{j}.conv.weight"] = (cout, cin, k)
        shapes[f"backbone.{j}.conv.bias"] = (cout,)
        for stat in ("gamma", "beta", "mean", "var"):
            shapes[f"backbone.{j}.bn.{stat}"] = (cout,)
    n_tasks = len(descriptor["class_counts"])
    if descriptor["attention"]:
        div = descriptor["attn_mid_divisor"]
        back = descriptor["backbone_channels"]
        for i in range(n_tasks):
            for j, cj in enumerate(back):
                cin = cj if j == 0 else cj + back[j - 1]
                mid = cj // div
                shapes[f"tasks.{i}.attn.{j}.conv1.weight"] = (mid, cin, 1)
                shapes[f"tasks.{i}.attn.{j}.conv1.bias"] = (mid,)
                shapes[f"tasks.{i}.attn.{j}.conv2.weight"] = (cj, mid, 1)
                shapes[f"tasks.{i}.attn.{j}.conv2.bias"] = (cj,)
                for b, ch in (("bn1", mid), ("bn2", cj)):
                    for stat in ("gamma", "beta", "mean", "var"):
                        shapes[f"tasks.{i}.attn.{j}.{b}.{stat}"] = (ch,)
    feat = head_input_dim(descriptor)
    for i, classes in enumerate(descriptor["class_counts"]):
        shapes[f"heads.{i}.fc.weight"] = (classes, feat)
        shapes[f"heads.{i}.fc.bias"] = (classes,)
    return shapes


def backbone_parameter_count(descriptor) -> int:
    chans = [descriptor["input_channels"]] + list(descriptor["backbone_channels"])
    k = descriptor["kernel_size"]
    total = 0
    for cin, cout in zip(chans, chans[1:]):
        total += cin * cout * k + cout  # conv
        total += 2 * cout               # batchnorm
    return total


def attention_parameter_count(descriptor) -> int:
    """Trainable parameters of one task-specific attention stream."""
    back = descriptor["backbone_channels"]
    div = descriptor["attn_mid_divisor"]
    total = 0
    for j, cj in enumerate(back):
        cin = cj if j == 0 else cj + back[j - 1]
        mid = cj // div
        total += cin * mid + mid + 2 * mid      # conv1 + bn1
        total += mid * cj + cj + 2 * cj         # conv2 + bn2
    return total


@dataclass
class NetworkWeights:
    descriptor: dict
    tensors: dict = field(repr=False)

    @property
    def n_tasks(self):
        return len(self.descriptor["class_counts"])


def _validate(descriptor, tensors):
    expected = expected_tensor_shapes(descriptor)
    missing = sorted(set(expected) - set(tensors))
    extra = sorted(set(tensors) - set(expected))
    if missing or extra:
        raise BadShapeError(f"tensor table mismatch: missing {missing[:3]}, extra {extra[:3]}")
    if descriptor.get("head_input_dim", head_input_dim(descriptor)) != head_input_dim(descriptor):
        raise BadShapeError("descriptor head_input_dim inconsistent with architecture")
    for name, shape in expected.items():
        t = tensors[name]
        if tuple(t.shape) != shape:
            raise BadShapeError(f"tensor {name} has shape {tuple(t.shape)}, expected {shape}")
        if not np.all(np.isfinite(t)):
            raise NonFiniteTensorError(f"tensor {name} contains NaN or Inf")
        if name.endswith(".var") and np.any(t < 0):
            raise BadShapeError(f"tensor {name} holds a negative variance")


def write_weights(path, weights: NetworkWeights):
    """Serialize to the AMPW0001 container (canonical: tensors sorted by name)."""
    _validate(weights.descriptor, weights.tensors)
    desc = dict(weights.descriptor)
    desc["head_input_dim"] = head_input_dim(desc)
    desc_bytes = json.dumps(desc, sort_keys=True, separators=(",", ":")).encode()
    names = sorted(weights.tensors)
    table = bytearray()
    data = bytearray()
    for name in names:
        t = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
        nb = name.encode()
        table += struct.pack("<H", len(nb)) + nb
        table += struct.pack("<BB", 0, t.ndim)
        table += struct.pack(f"<{t.ndim}I", *t.shape)
        table += struct.pack("<Q", len(data))
        data += t.tobytes()
    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<I", WEIGHTS_VERSION))
        f.write(struct.pack("<I", len(desc_bytes)))
        f.write(desc_bytes)
        f.write(struct.pack("<I", len(names)))
        f.write(table)
        f.write(data)


def load_weights(path) -> NetworkWeights:
    """Read and validate an AMPW0001 container.

    Magic, version, shape/name, and non-finite violations raise
    distinct error classes.
    """
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise TruncatedFileError("weights file ends inside a declared section")
        out = blob[off:off + n]
        off += n
        return out

    if take(8) != WEIGHTS_MAGIC:
        raise BadMagicError("not a weights container (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != WEIGHTS_VERSION:
        raise BadVersionError(f"unsupported weights version {version}")
    (dlen,) = struct.unpack("<I", take(4))
    try:
        descriptor = json.loads(take(dlen))
    except json.JSONDecodeError as e:
        raise BadShapeError(f"descriptor is not valid JSON: {e}") from e
    (count,) = struct.unpack("<I", take(4))
    entries = []
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode()
        dtype_code, rank = struct.unpack("<BB", take(2))
        if dtype_code != 0:
            raise BadShapeError(f"tensor {name} has unsupported dtype code {dtype_code}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        (offset,) = struct.unpack("<Q", take(8))
        entries.append((name, dims, offset))
    data = blob[off:]
    tensors = {}
    for name, dims, offset in entries:
        n = int(np.prod(dims)) if dims else 1
        end = offset + 4 * n
        if end > len(data):
            raise TruncatedFileError(f"tensor {name} data extends past end of file")
        tensors[name] = np.frombuffer(data[offset:end], dtype="<f4").reshape(dims).astype(np.float64)
    _validate(descriptor, tensors)
    return NetworkWeights(descriptor=descriptor, tensors=tensors)


# --- forward pass -----------------------------------------------------------

def _conv1d(x, w, b):
    """kernel-3, pad-1 (or 1x1) convolution on (C_in, L) -> (C_out, L)."""
    k = w.shape[2]
    if k == 1:
        return np.einsum("oi,il->ol", w[:, :, 0], x) + b[:, None]
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    return np.einsum("oik,ilk->ol", w, win) + b[:, None]


def _bn(x, tensors, prefix, eps):
    g, b = tensors[prefix + ".gamma"], tensors[prefix + ".beta"]
    m, v = tensors[prefix + ".mean"], tensors[prefix + ".var"]
    return (x - m[:, None]) / np.sqrt(v[:, None] + eps) * g[:, None] + b[:, None]


def _maxpool(x, k):
    n = x.shape[1] // k
    return x[:, :n * k].reshape(x.shape[0], n, k).max(axis=2)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits):
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def normalize_input(values, descriptor):
    mode = descriptor.get("input_norm", "none")
    values = np.asarray(values, dtype=complex)
    if mode == "none":
        return values
    if mode == "max_abs":
        peak = np.max(np.abs(values))
        return values / peak if peak > 0 else values
    raise ParameterError(f"unknown input normalization {mode!r}")


def forward_logits(pattern_values, weights: NetworkWeights):
    """Per-task logits for one complex beam pattern."""
    d = weights.descriptor
    t = weights.tensors
    eps = d.get("bn_eps", 1e-5)
    values = normalize_input(pattern_values, d)
    if len(values) != d["input_length"]:
        raise InputError(f"pattern length {len(values)} != descriptor input length {d['input_length']}")
    x = np.stack([values.real, values.imag])

    feats = []
    for j in range(len(d["backbone_channels"])):
        x = _conv1d(x, t[f"backbone.{j}.conv.weight"], t[f"backbone.{j}.conv.bias"])
        x = _bn(x, t, f"backbone.{j}.bn", eps)
        x = np.maximum(x, 0.0)
        x = _maxpool(x, d["pool"])
        feats.append(x)

    logits = []
    for i in range(len(d["class_counts"])):
        if d["attention"]:
            task = None
            for j, fj in enumerate(feats):
                inp = fj if task is None else np.concatenate([fj, _maxpool(task, d["pool"])])
                p = f"tasks.{i}.attn.{j}"
                h = _conv1d(inp, t[p + ".conv1.weight"], t[p + ".conv1.bias"])
                h = np.maximum(_bn(h, t, p + ".bn1", eps), 0.0)
                h = _conv1d(h, t[p + ".conv2.weight"], t[p + ".conv2.bias"])
                mask = _sigmoid(_bn(h, t, p + ".bn2", eps))
                task = fj * mask
            flat = task.reshape(-1)
        else:
            flat = feats[-1].reshape(-1)
        logits.append(t[f"heads.{i}.fc.weight"] @ flat + t[f"heads.{i}.fc.bias"])
    return logits


def forward(pattern_values, weights: NetworkWeights):
    """Per-task probability vectors (softmax over each head's logits)."""
    return [softmax(lg) for lg in forward_logits(pattern_values, weights)]


def topk(probs, k) -> np.ndarray:
    """Indices of the k largest values, descending; ties to the smaller index."""
    probs = np.asarray(probs)
    if k > len(probs):
        raise ParameterError(f"k = {k} exceeds vector length {len(probs)}")
    order = np.argsort(-probs, kind="stable")
    return order[:k]


def constant_weights(descriptor, head_biases) -> NetworkWeights:
    """All-zero convolutions, identity batchnorms, zero head weights.

    The forward pass of such a network returns softmax(head bias) for
    any input; used for format and plumbing tests.
    """
    tensors = {}
    for name, shape in expected_tensor_shapes(descriptor).items():
        if name.endswith(("bn.gamma", "bn1.gamma", "bn2.gamma", ".var")):
            tensors[name] = np.ones(shape, dtype=np.float64)
        else:
            tensors[name] = np.zeros(shape, dtype=np.float64)
    for i, bias in enumerate(head_biases):
        b = np.asarray(bias, dtype=np.float64)
        if b.shape != tensors[f"heads.{i}.fc.bias"].shape:
            raise BadShapeError(f"head {i} bias has wrong length")
        tensors[f"heads.{i}.fc.bias"] = b
    return NetworkWeights(descriptor=dict(descriptor), tensors=tensors)
