"""Reader for the ABTD0001 training-record container.

Layout (little-endian): magic 8s, version u32, L1 u32, record_size u32,
manifest_len u32, manifest JSON; then fixed-size records
x f64, y f64, blockage_ratio f32, pattern 2*L1 f32 (re/im interleaved),
l1 u16, l2 u16, l3 u16, pad u16, gain f32.
"""

import json
import struct

import numpy as np

MAGIC = b"ABTD0001"
VERSION = 1
_HEADER = struct.Struct("<8sIIII")


class RecordFormatError(Exception):
    pass


def load_dataset(path):
    """Returns (patterns complex64 (n, L1), labels int64 (n, 3), manifest dict)."""
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise RecordFormatError("file shorter than its header")
        magic, version, l1, rsize, mlen = _HEADER.unpack(head)
        if magic != MAGIC:
            raise RecordFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise RecordFormatError(f"unsupported version {version}")
        if rsize != 32 + 8 * l1:
            raise RecordFormatError("record size inconsistent with L1")
        manifest = json.loads(f.read(mlen))
        payload = f.read()
    if len(payload) % rsize:
        raise RecordFormatError("payload ends mid-record")
    n = len(payload) // rsize
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(n, rsize)
    inter = raw[:, 20:20 + 8 * l1].copy().view("<f4").reshape(n, 2 * l1)
    patterns = (inter[:, 0::2] + 1j * inter[:, 1::2]).astype(np.complex64)
    tail = raw[:, 20 + 8 * l1:].copy()
    labels = tail[:, 0:6].view("<u2").reshape(n, 3).astype(np.int64)
    gains = tail[:, 8:12].view("<f4").reshape(n)
    xy = raw[:, 0:16].copy().view("<f8").reshape(n, 2)
    return {
        "patterns": patterns,
        "labels": labels,
        "gains": gains.astype(np.float32),
        "positions": xy,
        "manifest": manifest,
    }


def class_counts(manifest) -> tuple:
    cb = manifest["codebook"]
    return cb["l1"], cb["l2"], cb["l3"]


def split_indices(n_records: int, seed: int):
    """80/10/10 split, floor rule, matching the generator's convention."""
    perm = np.random.default_rng(seed).permutation(n_records)
    n_train = int(0.8 * n_records)
    n_val = int(0.1 * n_records)
    return (np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]),
            np.sort(perm[n_train + n_val:]))
