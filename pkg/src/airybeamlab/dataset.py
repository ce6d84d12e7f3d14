"""Supervised sample generation and the binary record file format.

One record maps a receiver's DFT beam pattern to the indices of the
gain-optimal codeword of a curved-beam codebook, together with the
receiver position, its blockage ratio, and the optimal gain. Records
for one scenario live in one little-endian file (magic ``ABTD0001``):

    magic 8s | version u32 | L1 u32 | record_size u32
    | manifest_len u32 | manifest JSON
    | records: x f64, y f64, ratio f32, pattern 2*L1 f32 (re, im
      interleaved), l1 u16, l2 u16, l3 u16, pad u16, gain f32

Labeling uses the shared-propagation path: every codeword is marched
once and its gain read at all receivers simultaneously.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .codebooks import Codebook, CodebookSpec
from .errors import (BadMagicError, BadShapeError, BadVersionError, GeometryError,
                     LabelBoundsError, ParameterError, TruncatedFileError)
from .scenario import GridSpec, ScenarioConfig, blockage_ratio
from . import search as _search

DATASET_MAGIC = b"ABTD0001"
DATASET_VERSION = 1
_HEADER = struct.Struct("<8sIIII")


@dataclass
class TrainingRecord:
    x_r: float
    y_r: float
    blockage_ratio: float
    pattern: np.ndarray  # complex64, length L1
    labels: tuple        # (l1, l2, l3)
    gain: float

    def __eq__(self, other):
        return (self.x_r == other.x_r and self.y_r == other.y_r
                and np.float32(self.blockage_ratio) == np.float32(other.blockage_ratio)
                and np.array_equal(np.asarray(self.pattern, dtype=np.complex64),
                                   np.asarray(other.pattern, dtype=np.complex64))
                and tuple(self.labels) == tuple(other.labels)
                and np.float32(self.gain) == np.float32(other.gain))


@dataclass
class DatasetManifest:
    scenario: dict
    scenario_hash: str
    codebook: dict
    record_count: int
    sampling: dict = field(default_factory=dict)
    split: dict | None = None

    def to_json_dict(self):
        d = {"scenario": self.scenario, "scenario_hash": self.scenario_hash,
             "codebook": self.codebook, "record_count": self.record_count,
             "sampling": self.sampling}
        if self.split is not None:
            d["split"] = self.split
        return d


@dataclass(frozen=True)
class ReceiverSampling:
    """Where receivers are drawn: a grid-snapped lattice or uniform random."""

    x_range: tuple
    y_range: tuple
    mode: str = "lattice"       # "lattice" | "random"
    nx: int = 20
    ny: int = 20
    count: int = 0              # random mode
    seed: int = 0
    noise_std: float = 0.0      # optional complex noise on patterns

    def to_json_dict(self):
        return {"x_range": list(self.x_range), "y_range": list(self.y_range),
                "mode": self.mode, "nx": self.nx, "ny": self.ny,
                "count": self.count, "seed": self.seed, "noise_std": self.noise_std}


def sample_receivers(sampling: ReceiverSampling, grid: GridSpec) -> np.ndarray:
    """Receiver positions snapped to grid-cell centers, shape (P, 2)."""
    if sampling.mode == "lattice":
        xs = np.linspace(*sampling.x_range, sampling.nx)
        ys = np.linspace(*sampling.y_range, sampling.ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
    elif sampling.mode == "random":
        rng = np.random.default_rng(sampling.seed)
        pts = np.column_stack([rng.uniform(*sampling.x_range, sampling.count),
                               rng.uniform(*sampling.y_range, sampling.count)])
    else:
        raise ParameterError(f"unknown sampling mode {sampling.mode!r}")
    snapped = np.column_stack([grid.x_of(grid.col_of(pts[:, 0])),
                               grid.y_of(grid.row_of(pts[:, 1]))])
    return np.unique(snapped, axis=0)


def generate_dataset(config: ScenarioConfig, codebook: Codebook, spec: CodebookSpec,
                     grid: GridSpec, sampling: ReceiverSampling,
                     dtype=np.complex128, workers=None):
    """Label every sampled receiver; returns (records, manifest, gains).

    ``gains`` is the full (|codebook|, P) gain table, handy for
    downstream method evaluation without re-propagating. Fully occluded
    receivers keep their all-zero pattern and take the tie-break label
    (flat index 0).
    """
    reg = config.region
    if not (reg.x_min <= sampling.x_range[0] and sampling.x_range[1] <= reg.x_max
            and reg.y_min <= sampling.y_range[0] and sampling.y_range[1] <= reg.y_max):
        raise GeometryError("receiver sampling range extends outside the grid region")
    receivers = sample_receivers(sampling, grid)
    patterns = _search.dft_sweep_many(config, grid, receivers, dtype=dtype, workers=workers)
    if sampling.noise_std > 0:
        rng = np.random.default_rng(sampling.seed + 1)
        noise = rng.normal(0, sampling.noise_std / np.sqrt(2), (2, *patterns.shape))
        patterns = patterns + noise[0] + 1j * noise[1]
    gains = _search.gain_table(codebook, config, grid, receivers, dtype=dtype, workers=workers)
    best = np.argmax(gains, axis=0)
    records = []
    for p, (xr, yr) in enumerate(receivers):
        flat = int(best[p])
        l1, l2, l3 = codebook.indices(flat)
        records.append(TrainingRecord(
            x_r=float(xr), y_r=float(yr),
            blockage_ratio=float(np.float32(blockage_ratio(config, (xr, yr)))),
            pattern=patterns[p].astype(np.complex64),
            labels=(int(l1), int(l2), int(l3)),
            gain=float(np.float32(gains[flat, p])),
        ))
    manifest = DatasetManifest(
        scenario=config.to_json_dict(),
        scenario_hash=config.hash(),
        codebook=spec.to_json_dict(),
        record_count=len(records),
        sampling=sampling.to_json_dict(),
    )
    return records, manifest, gains


def split_dataset(n_records: int, seed: int):
    """Deterministic 80/10/10 split; returns (train, val, test) index arrays.

    Sizes are floor(0.8 n) / floor(0.1 n) / remainder.
    """
    if n_records < 10:
        raise ParameterError(f"need at least 10 records to split, got {n_records}")
    perm = np.random.default_rng(seed).permutation(n_records)
    n_train = int(0.8 * n_records)
    n_val = int(0.1 * n_records)
    train = np.sort(perm[:n_train])
    val = np.sort(perm[n_train:n_train + n_val])
    test = np.sort(perm[n_train + n_val:])
    return train, val, test


def _record_struct(l1: int):
    return struct.Struct(f"<ddf{2 * l1}fHHHHf")


def record_size(l1: int) -> int:
    return 32 + 8 * l1


def write_records(path, records, manifest: DatasetManifest):
    """Write the ABTD0001 container; pattern and gain are stored float32."""
    if not records:
        raise ParameterError("refusing to write an empty dataset")
    l1 = len(records[0].pattern)
    rs = _record_struct(l1)
    manifest = DatasetManifest(**{**manifest.__dict__, "record_count": len(records)})
    mbytes = json.dumps(manifest.to_json_dict(), sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, l1, rs.size, len(mbytes)))
        f.write(mbytes)
        for r in records:
            pat = np.asarray(r.pattern, dtype=np.complex64)
            if len(pat) != l1:
                raise BadShapeError("record pattern length differs from header L1")
            inter = np.empty(2 * l1, dtype="<f4")
            inter[0::2] = pat.real
            inter[1::2] = pat.imag
            f.write(rs.pack(r.x_r, r.y_r, np.float32(r.blockage_ratio), *inter,
                            *r.labels, 0, np.float32(r.gain)))


def read_records(path):
    """Read an ABTD0001 container; returns (records, manifest).

    Bad magic, bad version, truncation, and out-of-range labels raise
    distinct errors.
    """
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise TruncatedFileError("dataset file shorter than its header")
        magic, version, l1, rsize, mlen = _HEADER.unpack(head)
        if magic != DATASET_MAGIC:
            raise BadMagicError(f"not a dataset file (magic {magic!r})")
        if version != DATASET_VERSION:
            raise BadVersionError(f"unsupported dataset version {version}")
        if rsize != record_size(l1):
            raise BadShapeError(f"record size {rsize} inconsistent with L1 = {l1}")
        mbytes = f.read(mlen)
        if len(mbytes) < mlen:
            raise TruncatedFileError("dataset manifest truncated")
        manifest_dict = json.loads(mbytes)
        payload = f.read()
    if len(payload) % rsize:
        raise TruncatedFileError("dataset payload ends mid-record")
    n = len(payload) // rsize
    if n != manifest_dict.get("record_count", n):
        raise TruncatedFileError(
            f"manifest declares {manifest_dict['record_count']} records, file holds {n}")
    dims = (manifest_dict["codebook"]["l1"], manifest_dict["codebook"]["l2"],
            manifest_dict["codebook"]["l3"])
    rs = _record_struct(l1)
    records = []
    for i in range(n):
        fields = rs.unpack_from(payload, i * rsize)
        xr, yr, ratio = fields[0], fields[1], fields[2]
        inter = np.array(fields[3:3 + 2 * l1], dtype=np.float32)
        i1, i2, i3, _pad, gain = fields[3 + 2 * l1:]
        if not (i1 < dims[0] and i2 < dims[1] and i3 < dims[2]):
            raise LabelBoundsError(f"record {i} labels ({i1}, {i2}, {i3}) outside dims {dims}")
        records.append(TrainingRecord(
            x_r=xr, y_r=yr, blockage_ratio=ratio,
            pattern=(inter[0::2] + 1j * inter[1::2]).astype(np.complex64),
            labels=(i1, i2, i3), gain=gain,
        ))
    manifest = DatasetManifest(
        scenario=manifest_dict["scenario"], scenario_hash=manifest_dict["scenario_hash"],
        codebook=manifest_dict["codebook"], record_count=n,
        sampling=manifest_dict.get("sampling", {}), split=manifest_dict.get("split"),
    )
    return records, manifest


def audit_records(records, manifest, codebook: Codebook, config: ScenarioConfig,
                  grid: GridSpec, fraction=0.01, seed=0, rng=None,
                  dtype=np.complex128, workers=None):
    """Re-sweep a random sample of records and check labels and gains.

    Returns the number of audited records; raises LabelBoundsError on
    any mismatch. Gains are compared after float32 rounding, matching
    the storage precision.
    """
    if config.hash() != manifest.scenario_hash:
        raise BadShapeError("scenario hash mismatch: dataset drifted from config")
    rng = rng or np.random.default_rng(seed)
    n_audit = max(1, int(round(fraction * len(records))))
    picks = rng.choice(len(records), size=n_audit, replace=False)
    receivers = np.array([[records[i].x_r, records[i].y_r] for i in picks])
    gains = _search.gain_table(codebook, config, grid, receivers, dtype=dtype, workers=workers)
    best = np.argmax(gains, axis=0)
    for j, i in enumerate(picks):
        rec = records[i]
        flat = int(best[j])
        labels = tuple(int(v) for v in codebook.indices(flat))
        if labels != tuple(rec.labels):
            raise LabelBoundsError(
                f"record {i}: stored labels {rec.labels}, re-sweep found {labels}")
        if np.float32(gains[flat, j]) != np.float32(rec.gain):
            raise LabelBoundsError(
                f"record {i}: stored gain {rec.gain}, re-sweep found {gains[flat, j]}")
    return n_audit
