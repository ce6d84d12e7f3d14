"""Complex field computation: point-source oracles and the FFT slice-marching propagator.

Three routes to the field radiated by an aperture excitation:

``direct_field``
    Superposition of per-element point-source contributions. Exact for a
    linear array of point radiators in free space; the validation oracle.

``fresnel_field``
    Paraxial quadratic-phase approximation of the same superposition.

``propagate``
    Production path. Marches column by column: the spectrum of each
    y-slice is multiplied by a unimodular transfer function and the
    amplitude blockage mask of the next column is applied pointwise.
    Free-space runs between mask changes are collapsed into single
    steps, which is exact because the transfer function composes
    multiplicatively.

Amplitude convention: the slice-marching recursion propagates cylindrical
(sheet-source) wavefronts, whose magnitude falls off like 1/sqrt(distance),
while the element superposition of ``direct_field`` falls off like
1/distance. ``propagate`` therefore rescales its readout by
exp(j*pi/4) / sqrt(lambda * hypot(x, y)), the standard conversion between
the two spreading laws, so that both routes report the same field away
from the aperture. Pass ``gauge="none"`` for the raw marching values.
The conversion is a fixed pointwise factor: it preserves linearity and
never changes which codeword wins at a given receiver.
"""

import struct

import numpy as np
import scipy.fft as _fft

from .errors import BadMagicError, GeometryError, TruncatedFileError, UnsupportedSceneError
from .scenario import GridSpec, ScenarioConfig, antenna_rows, blockage_mask_row, masked_columns

# Fixed evaluation chunk so batched FFT shapes (and hence results) do not
# depend on caller-chosen parallelism.
DEFAULT_CHUNK = 256


def beam_gain(field_value) -> np.ndarray:
    """|E|^2, elementwise."""
    return np.abs(np.asarray(field_value)) ** 2


def _as_points(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != 2:
        raise GeometryError("points must be (x, y) pairs")
    return pts


def direct_field(aperture, points, config: ScenarioConfig):
    """Point-source superposition oracle (free space only).

    Parameters
    ----------
    aperture : array, shape (N,) or (K, N)
        Complex excitation per antenna element.
    points : (x, y) pair or array of pairs, x > 0.

    Returns the complex field, shape () / (P,) / (K, P) following the
    input shapes.
    """
    if config.obstacles:
        raise UnsupportedSceneError("direct_field is a free-space oracle; scene has obstacles")
    ap = np.asarray(aperture, dtype=complex)
    single_ap = ap.ndim == 1
    ap = np.atleast_2d(ap)
    pts = _as_points(points)
    single_pt = np.asarray(points, dtype=float).ndim == 1
    if np.any(pts[:, 0] <= 0):
        raise GeometryError("oracle points must have x > 0")
    kappa = config.wavenumber
    delta = config.spacing
    ys = config.antenna_y()
    x = pts[:, 0][:, None]
    dy = pts[:, 1][:, None] - ys[None, :]
    r = np.hypot(x, dy)
    kernel = np.exp(-1j * kappa * r) * x / (2.0 * np.pi * r ** 2) * (1j * kappa + 1.0 / r) * delta
    out = ap @ kernel.T
    if single_ap:
        out = out[0]
    return out[..., 0] if single_pt else out


def fresnel_field(aperture, points, config: ScenarioConfig):
    """Paraxial quadratic-phase oracle (free space only)."""
    if config.obstacles:
        raise UnsupportedSceneError("fresnel_field is a free-space oracle; scene has obstacles")
    ap = np.asarray(aperture, dtype=complex)
    single_ap = ap.ndim == 1
    ap = np.atleast_2d(ap)
    pts = _as_points(points)
    single_pt = np.asarray(points, dtype=float).ndim == 1
    if np.any(pts[:, 0] <= 0):
        raise GeometryError("oracle points must have x > 0")
    kappa = config.wavenumber
    lam = config.wavelength
    delta = config.spacing
    ys = config.antenna_y()
    x = pts[:, 0][:, None]
    dy = pts[:, 1][:, None] - ys[None, :]
    kernel = (np.exp(-1j * kappa * x) / (1j * lam * x)) * np.exp(-1j * kappa * dy ** 2 / (2.0 * x)) * delta
    out = ap @ kernel.T
    if single_ap:
        out = out[0]
    return out[..., 0] if single_pt else out


def transfer_function(f_y, step_x: float, wavelength: float) -> np.ndarray:
    """Spectral propagator over a distance step_x for cyclic spatial frequency f_y.

    Propagating content (|lambda * f_y| <= 1) advances with unit
    magnitude; beyond the cutoff the evanescent branch decays.
    """
    if step_x <= 0:
        raise GeometryError("propagation step must be positive")
    scalar = np.isscalar(f_y)
    f_y = np.atleast_1d(np.asarray(f_y, dtype=float))
    kappa = 2.0 * np.pi / wavelength
    s = (wavelength * f_y) ** 2
    h = np.empty(f_y.shape, dtype=complex)
    prop = s <= 1.0
    h[prop] = np.exp(-1j * kappa * step_x * np.sqrt(1.0 - s[prop]))
    h[~prop] = np.exp(-kappa * step_x * np.sqrt(s[~prop] - 1.0))
    return complex(h[0]) if scalar else h


def _pad_length(n_rows: int) -> int:
    m = 1
    while m < 2 * n_rows:
        m *= 2
    return m


def _pad_mask(mask_row, pad, offset, dtype):
    """Embed a grid mask row into the padded domain.

    The padded margin models open space beyond the region and stays
    transparent, except that a blocker reaching the region boundary
    seals it: the row's edge values continue through the margin.
    """
    padded = np.empty(pad, dtype=dtype)
    padded[:offset] = mask_row[0]
    padded[offset:offset + len(mask_row)] = mask_row
    padded[offset + len(mask_row):] = mask_row[-1]
    return padded


def line_source_gauge(x, y, wavelength):
    """Readout factor converting marching amplitudes to element-superposition ones.

    On the aperture plane itself (x = 0) the conversion is meaningless
    and the factor is 1.
    """
    x = np.asarray(x, dtype=float)
    r = np.hypot(x, np.asarray(y, dtype=float))
    with np.errstate(divide="ignore"):
        g = np.exp(1j * np.pi / 4) / np.sqrt(wavelength * r)
    return np.where(x == 0.0, 1.0 + 0.0j, g)


class _Marcher:
    """Stateful column-to-column stepper over the zero-padded y-lattice.

    The padded tail is kept alive across steps so that a collapsed
    free-space step equals the equivalent sequence of unit steps
    bit-for-bit up to rounding.
    """

    def __init__(self, config, grid, apertures, dtype, workers):
        self.config = config
        self.grid = grid
        self.workers = workers
        self.pad = _pad_length(grid.n_rows)
        self.offset = (self.pad - grid.n_rows) // 2
        ap = np.atleast_2d(np.asarray(apertures, dtype=complex))
        state = np.zeros((ap.shape[0], self.pad), dtype=dtype)
        rows = antenna_rows(config, grid) + self.offset
        state[:, rows] = ap.astype(dtype)
        self.state = state
        self.col = 0
        f_y = _fft.fftfreq(self.pad, d=grid.dy)
        self._h_unit = {}
        self._f_y = f_y
        self._dtype = dtype

    def _h(self, n_steps: int) -> np.ndarray:
        h = self._h_unit.get(n_steps)
        if h is None:
            h = transfer_function(self._f_y, n_steps * self.grid.dx, self.config.wavelength)
            h = h.astype(self._dtype)
            self._h_unit[n_steps] = h
        return h

    def advance(self, target_col: int, mask_row=None):
        """Propagate to target_col in one collapsed step, then apply the mask."""
        n = target_col - self.col
        if n < 0:
            raise GeometryError("marching backwards is not supported")
        if n > 0:
            spec = _fft.fft(self.state, axis=-1, workers=self.workers)
            spec *= self._h(n)
            self.state = _fft.ifft(spec, axis=-1, workers=self.workers)
            self.col = target_col
        if mask_row is not None:
            self.state *= _pad_mask(mask_row, self.pad, self.offset,
                                    self.state.real.dtype)

    def window(self) -> np.ndarray:
        return self.state[:, self.offset:self.offset + self.grid.n_rows]


def propagate(aperture, config: ScenarioConfig, grid: GridSpec, keep="all",
              gauge="line", dtype=np.complex128, workers=None):
    """March the aperture field through the gridded scene.

    Parameters
    ----------
    aperture : array, shape (N,) or (K, N)
        Complex excitation(s); embedded on the aperture-plane column.
    keep : "all" or a sequence of (x, y) probe points
        "all" returns the field over the whole grid, shape
        (n_cols, n_rows) per aperture; probe points are snapped to the
        grid and returned as values, shape (P,) per aperture.
    gauge : "line" or "none"
        Amplitude convention of the readout (see module docstring).
    dtype : complex dtype for the march (complex64 speeds up big sweeps).

    The recursion is E(x_i, :) = B(x_i, :) * IFFT(FFT(E(x_{i-1}, :)) * H),
    with runs of mask-free columns collapsed into single steps.
    """
    if gauge not in ("line", "none"):
        raise ValueError(f"unknown gauge {gauge!r}")
    ap = np.asarray(aperture, dtype=complex)
    single = ap.ndim == 1
    marcher = _Marcher(config, grid, ap, dtype, workers)
    keep_all = isinstance(keep, str) and keep == "all"

    masked = masked_columns(config, grid)
    masked = masked[masked > 0]
    if keep_all:
        out_cols = np.arange(grid.n_cols)
    else:
        pts = _as_points(keep)
        probe_cols = grid.col_of(pts[:, 0])
        probe_rows = grid.row_of(pts[:, 1])
        out_cols = np.unique(probe_cols)

    n_ap = 1 if single else ap.shape[0]
    events = np.unique(np.concatenate([masked, out_cols]))
    events = events[events >= 0]
    mask_set = set(masked.tolist())
    out_set = set(out_cols.tolist())
    field = np.empty((n_ap, grid.n_cols, grid.n_rows), dtype=dtype) if keep_all else None
    collect = {}

    def emit(col):
        if keep_all:
            field[:, col, :] = marcher.window()
        else:
            collect[col] = marcher.window().copy()

    if 0 in out_set:
        emit(0)
    for col in events:
        if col == 0:
            continue
        mask = blockage_mask_row(config, grid, int(col)) if col in mask_set else None
        marcher.advance(int(col), mask)
        if col in out_set:
            emit(int(col))

    if keep_all:
        if gauge == "line":
            x = grid.x_of(np.arange(grid.n_cols))[:, None]
            y = grid.y_values()[None, :]
            field *= line_source_gauge(x, y, config.wavelength).astype(dtype)
        return field[0] if single else field

    values = np.empty((n_ap, len(probe_cols)), dtype=dtype)
    for i, (pc, pr) in enumerate(zip(probe_cols, probe_rows)):
        values[:, i] = collect[int(pc)][:, pr]
    if gauge == "line":
        xs = grid.x_of(probe_cols)
        ys = grid.y_of(probe_rows)
        values *= line_source_gauge(xs, ys, config.wavelength).astype(dtype)
    return values[0] if single else values


def receiver_green_vector(config: ScenarioConfig, grid: GridSpec, receiver,
                          gauge="line", dtype=np.complex128, workers=None) -> np.ndarray:
    """Aperture response g of one receiver: E(receiver | b) = b @ g for any codeword b.

    The marching operator is a product of symmetric convolutions and
    diagonal masks, so its transpose is the same march run backwards
    with each column's mask applied before stepping instead of after.
    Back-propagating a unit point source from the receiver therefore
    yields, at the antenna rows, the exact aperture-to-receiver response
    of the forward march (up to rounding). One such vector turns an
    entire codebook sweep into a matrix-vector product.
    """
    if gauge not in ("line", "none"):
        raise ValueError(f"unknown gauge {gauge!r}")
    rx_col = int(grid.col_of(receiver[0]))
    rx_row = int(grid.row_of(receiver[1]))
    pad = _pad_length(grid.n_rows)
    offset = (pad - grid.n_rows) // 2
    state = np.zeros((1, pad), dtype=dtype)
    state[0, offset + rx_row] = 1.0

    masked = masked_columns(config, grid)
    masked = set(masked[(masked > 0) & (masked <= rx_col)].tolist())
    f_y = _fft.fftfreq(pad, d=grid.dy)
    h_cache = {}

    def step_down(n_cols):
        nonlocal state
        if n_cols not in h_cache:
            h_cache[n_cols] = transfer_function(
                f_y, n_cols * grid.dx, config.wavelength).astype(dtype)
        spec = _fft.fft(state, axis=-1, workers=workers)
        spec *= h_cache[n_cols]
        state = _fft.ifft(spec, axis=-1, workers=workers)

    def apply_mask(col):
        state[0] *= _pad_mask(blockage_mask_row(config, grid, col), pad, offset,
                              state.real.dtype)

    # Transpose order: mask on arrival (and at the receiver column if it
    # is itself masked), stepping from the receiver back to the aperture.
    col = rx_col
    if col in masked:
        apply_mask(col)
    for target in sorted((c for c in masked if c < rx_col), reverse=True):
        step_down(col - target)
        apply_mask(target)
        col = target
    if col > 0:
        step_down(col)
    g = state[0, offset + antenna_rows(config, grid)]
    if gauge == "line":
        g = g * line_source_gauge(grid.x_of(rx_col), grid.y_of(rx_row), config.wavelength)
    return g


# --- field dump -------------------------------------------------------------

FIELD_MAGIC = b"ABFS0001"
_FIELD_HEADER = struct.Struct("<8sIIdd")


def write_field(path, field: np.ndarray, grid: GridSpec):
    """Binary dump: header (magic, rows, cols, dx, dy) + row-major float32 (re, im).

    ``field`` has shape (n_cols, n_rows) as returned by propagate; it is
    stored row-major over (rows, cols) = (y, x).
    """
    arr = np.asarray(field)
    if arr.shape != (grid.n_cols, grid.n_rows):
        raise ValueError(f"field shape {arr.shape} does not match grid")
    data = arr.T.astype(np.complex64)
    inter = np.empty((grid.n_rows, grid.n_cols, 2), dtype="<f4")
    inter[..., 0] = data.real
    inter[..., 1] = data.imag
    with open(path, "wb") as f:
        f.write(_FIELD_HEADER.pack(FIELD_MAGIC, grid.n_rows, grid.n_cols, grid.dx, grid.dy))
        f.write(inter.tobytes())


def read_field(path):
    """Read a field dump; returns (field (n_cols, n_rows) complex64, dx, dy)."""
    with open(path, "rb") as f:
        head = f.read(_FIELD_HEADER.size)
        if len(head) < _FIELD_HEADER.size:
            raise TruncatedFileError("field dump shorter than its header")
        magic, rows, cols, dx, dy = _FIELD_HEADER.unpack(head)
        if magic != FIELD_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        payload = f.read()
    expected = rows * cols * 8
    if len(payload) != expected:
        raise TruncatedFileError(f"expected {expected} payload bytes, found {len(payload)}")
    inter = np.frombuffer(payload, dtype="<f4").reshape(rows, cols, 2)
    return (inter[..., 0] + 1j * inter[..., 1]).astype(np.complex64).T, dx, dy
