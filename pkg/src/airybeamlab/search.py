"""Codeword selection strategies and their measurement-overhead accounting.

Every strategy maximizes the receiver gain |E|^2 over some subset of a
codebook and reports how many field measurements it spent:

    exhaustive sweep        L1*L2*L3
    focusing sweep          L1*L2          (c = 0 slice)
    two-stage hierarchical  L1*L2 + L3
    learned candidate       L1 + k1*k2*k3  (DFT sweep + candidate sweep)

Ties always resolve to the smallest flat codebook index, and codeword
evaluation is chunked with a fixed block size so results are identical
no matter how the work is split.
"""

from dataclasses import dataclass

import numpy as np

from .codebooks import BeamParams, Codebook, build_dft_codebook
from .errors import ConfigMismatchError, InputError, ParameterError
from .field import DEFAULT_CHUNK, propagate, receiver_green_vector
from .inference import forward, topk
from .scenario import GridSpec, ScenarioConfig


@dataclass(frozen=True)
class BeamPattern:
    """Complex received signal across the DFT sweep, in sweep (angle) order."""

    values: np.ndarray
    receiver: tuple
    n_antennas: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(values)):
            raise InputError("beam pattern contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def magnitude(self):
        return np.abs(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SearchResult:
    method: str
    l1: int
    l2: int
    l3: int
    flat: int
    params: BeamParams
    gain: float
    overhead: int
    trace: np.ndarray | None = None


def strategy_overhead(method: str, dims, k=None) -> int:
    """Measurement count formula per strategy at codebook dims (L1, L2, L3)."""
    l1, l2, l3 = dims
    if method == "airy-bs":
        return l1 * l2 * l3
    if method == "focus-bs":
        return l1 * l2
    if method == "airy-hier":
        return l1 * l2 + l3
    if method in ("airy-dl", "focus-dl"):
        if k is None:
            raise ParameterError("learned strategies need the candidate counts k")
        k1, k2, k3 = k
        return l1 + k1 * k2 * k3
    raise ParameterError(f"unknown method {method!r}")


def evaluate_gains(codebook: Codebook, flats, config, grid, receivers,
                   dtype=np.complex128, workers=None, chunk=DEFAULT_CHUNK,
                   path="forward") -> np.ndarray:
    """Gains of the given codewords at the given receivers, shape (len(flats), P).

    ``path="forward"`` propagates codewords in fixed-size blocks and
    reads every receiver column from the same march, so labeling many
    receivers costs one propagation per codeword. ``path="adjoint"``
    back-propagates one point source per receiver instead and reduces
    each codeword to an inner product with the resulting aperture
    response; it is the fast route when sweeping a large codebook over
    few receivers. The two paths agree to rounding; see
    ``field.receiver_green_vector``.
    """
    flats = np.asarray(flats, dtype=int)
    receivers = np.atleast_2d(np.asarray(receivers, dtype=float))
    if path not in ("forward", "adjoint"):
        raise ParameterError(f"unknown evaluation path {path!r}")
    if path == "adjoint":
        green = np.stack([receiver_green_vector(config, grid, rx, dtype=dtype,
                                                workers=workers)
                          for rx in receivers])
        out = np.empty((len(flats), len(receivers)))
        for lo in range(0, len(flats), max(chunk, 4096)):
            block = flats[lo:lo + max(chunk, 4096)]
            out[lo:lo + len(block)] = np.abs(codebook.codewords(block) @ green.T) ** 2
        return out
    out = np.empty((len(flats), len(receivers)))
    for lo in range(0, len(flats), chunk):
        block = flats[lo:lo + chunk]
        cw = codebook.codewords(block)
        values = propagate(cw, config, grid, keep=receivers, dtype=dtype, workers=workers)
        out[lo:lo + len(block)] = np.abs(values) ** 2
    return out


def gain_table(codebook: Codebook, config, grid, receivers,
               dtype=np.complex128, workers=None, chunk=DEFAULT_CHUNK) -> np.ndarray:
    """Full (|codebook|, P) gain table via the shared-propagation path."""
    return evaluate_gains(codebook, np.arange(len(codebook)), config, grid, receivers,
                          dtype=dtype, workers=workers, chunk=chunk)


def _argmax_first(gains: np.ndarray) -> int:
    # np.argmax returns the first occurrence, which is the smallest index.
    return int(np.argmax(gains))


def dft_sweep(config: ScenarioConfig, grid: GridSpec, receiver, magnitude_only=False,
              dtype=np.complex128, workers=None) -> BeamPattern:
    """Sweep the N-codeword DFT codebook and record the receiver signal.

    The received signal is kept complex by default; ``magnitude_only``
    replaces it with |E| for pipelines that discard phase.
    """
    dft = build_dft_codebook(config.n_antennas, config.wavenumber, config.spacing)
    values = propagate(dft.materialize(), config, grid, keep=[receiver],
                       dtype=dtype, workers=workers)[:, 0]
    if magnitude_only:
        values = np.abs(values).astype(complex)
    return BeamPattern(values=values, receiver=tuple(receiver), n_antennas=config.n_antennas)


def dft_sweep_many(config, grid, receivers, magnitude_only=False,
                   dtype=np.complex128, workers=None) -> np.ndarray:
    """Patterns for many receivers at once, shape (P, N)."""
    dft = build_dft_codebook(config.n_antennas, config.wavenumber, config.spacing)
    values = propagate(dft.materialize(), config, grid, keep=receivers,
                       dtype=dtype, workers=workers).T
    if magnitude_only:
        values = np.abs(values).astype(complex)
    return values


def exhaustive_sweep(codebook: Codebook, config, grid, receiver, method="airy-bs",
                     keep_trace=False, dtype=np.complex128, workers=None,
                     path="forward") -> SearchResult:
    """Evaluate every codeword; ties break to the smallest flat index."""
    if len(codebook) == 0:
        raise ParameterError("codebook is empty")
    gains = evaluate_gains(codebook, np.arange(len(codebook)), config, grid, [receiver],
                           dtype=dtype, workers=workers, path=path)[:, 0]
    best = _argmax_first(gains)
    l1, l2, l3 = codebook.indices(best)
    return SearchResult(method=method, l1=int(l1), l2=int(l2), l3=int(l3), flat=best,
                        params=codebook.params(best), gain=float(gains[best]),
                        overhead=len(codebook), trace=gains if keep_trace else None)


def hierarchical_search(codebook: Codebook, config, grid, receiver,
                        dtype=np.complex128, workers=None, path="forward") -> SearchResult:
    """Two-stage search: full (angle, distance) sweep at c = 0, then curvature.

    Overhead is L1*L2 + L3. Requires the curvature axis to contain 0.
    """
    c0 = codebook.c_zero_index()
    d1, d2, d3 = codebook.dims
    stage1 = np.array([codebook.flat_index(l1, l2, c0) for l1 in range(d1) for l2 in range(d2)])
    g1 = evaluate_gains(codebook, stage1, config, grid, [receiver],
                        dtype=dtype, workers=workers, path=path)[:, 0]
    best1 = stage1[_argmax_first(g1)]
    b1, b2, _ = codebook.indices(best1)
    stage2 = np.array([codebook.flat_index(int(b1), int(b2), l3) for l3 in range(d3)])
    g2 = evaluate_gains(codebook, stage2, config, grid, [receiver],
                        dtype=dtype, workers=workers, path=path)[:, 0]
    best = stage2[_argmax_first(g2)]
    l1, l2, l3 = codebook.indices(best)
    return SearchResult(method="airy-hier", l1=int(l1), l2=int(l2), l3=int(l3), flat=int(best),
                        params=codebook.params(best), gain=float(np.max(g2)),
                        overhead=d1 * d2 + d3)


def candidate_codebook(probs, k, codebook: Codebook) -> np.ndarray:
    """Flat indices of the candidate sub-codebook from per-task probabilities.

    Takes the top-k_i indices of each task (ties to the smaller index)
    and forms their Cartesian product; returned sorted ascending so a
    first-occurrence argmax respects the global tie-break rule. A
    two-task network addresses a codebook whose curvature axis is the
    singleton {0}.
    """
    d = codebook.dims
    if len(probs) != len(k):
        raise InputError("need one candidate count per probability vector")
    if any(len(p) != d[i] for i, p in enumerate(probs)):
        raise InputError(f"probability vector lengths must match codebook dims {d}")
    if any(d[i] != 1 for i in range(len(probs), 3)):
        raise InputError("tasks beyond the prediction cover non-singleton axes")
    for p in probs:
        if not np.all(np.isfinite(p)):
            raise InputError("probabilities contain non-finite values")
    tops = [topk(p, ki) for p, ki in zip(probs, k)]
    tops += [np.array([0])] * (3 - len(tops))
    flats = [codebook.flat_index(int(i1), int(i2), int(i3))
             for i1 in tops[0] for i2 in tops[1] for i3 in tops[2]]
    return np.array(sorted(flats), dtype=int)


def check_architecture(weights, codebook: Codebook):
    """Weights class counts must match the codebook's non-singleton dims."""
    counts = list(weights.descriptor["class_counts"])
    dims = codebook.dims
    if counts != list(dims[:len(counts)]) or any(d != 1 for d in dims[len(counts):]):
        raise ConfigMismatchError(
            f"weights predict {counts} classes but codebook dims are {dims}")


def dl_beam_training(pattern: BeamPattern, weights, codebook: Codebook, config, grid,
                     receiver, k=(3, 3, 5), method="airy-dl",
                     dtype=np.complex128, workers=None) -> SearchResult:
    """Learned search: infer per-task probabilities, sweep only the candidates.

    Overhead is L1 (the DFT sweep that produced the pattern) plus the
    candidate count.
    """
    check_architecture(weights, codebook)
    probs = forward(pattern.values, weights)
    flats = candidate_codebook(probs, tuple(k)[:len(probs)], codebook)
    gains = evaluate_gains(codebook, flats, config, grid, [receiver],
                           dtype=dtype, workers=workers)[:, 0]
    best = int(flats[_argmax_first(gains)])
    l1, l2, l3 = codebook.indices(best)
    return SearchResult(method=method, l1=int(l1), l2=int(l2), l3=int(l3), flat=best,
                        params=codebook.params(best), gain=float(np.max(gains)),
                        overhead=len(pattern) + len(flats))
