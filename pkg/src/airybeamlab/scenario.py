"""Physical scene description, simulation grid, and blockage geometry.

The transmitter is an N-element uniform linear array on the y-axis,
symmetric about the x-axis, radiating into the half-plane x > 0. The
propagation environment is a uniform 2D grid with steps no larger than
half a wavelength; rectangular obstacles attenuate the field amplitude
on every grid cell they cover.

Conventions shared by every module:
  * all lengths in meters, the aperture plane is x = 0,
  * antenna n sits at (0, n*delta) for n = (1-N)/2 ... (N-1)/2 (integer
    offsets for odd N, half-integer offsets for even N),
  * the y-lattice is anchored so that every antenna lands exactly on a
    row (at y = 0 for odd N, at delta/2 for even N),
  * cell attenuation is the minimum over covering obstacles (most opaque
    wins), obstacle boundaries are closed.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ParameterError, SamplingError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned rectangular blocker with an amplitude attenuation in [0, 1)."""

    cx: float
    cy: float
    dx: float
    dy: float
    attenuation: float = 0.0

    def __post_init__(self):
        if self.dx <= 0 or self.dy <= 0:
            raise ParameterError(f"obstacle dims must be positive, got ({self.dx}, {self.dy})")
        if not 0.0 <= self.attenuation < 1.0:
            raise ParameterError(f"attenuation must be in [0, 1), got {self.attenuation}")

    @property
    def x_range(self):
        return self.cx - self.dx / 2.0, self.cx + self.dx / 2.0

    @property
    def y_range(self):
        return self.cy - self.dy / 2.0, self.cy + self.dy / 2.0


@dataclass(frozen=True)
class Region:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError(f"region is empty or inverted: {self}")

    def contains(self, x, y):
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class ScenarioConfig:
    """Full physical setup: carrier, array, grid steps, region, obstacles.

    Antenna spacing is fixed to half a wavelength. ``grid_step_x`` /
    ``grid_step_y`` default to the same half wavelength and may only be
    made finer, never coarser.
    """

    frequency_hz: float
    n_antennas: int
    region: Region
    obstacles: tuple = ()
    attenuation_default: float = 0.0
    grid_step_x: float | None = None
    grid_step_y: float | None = None

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise ParameterError("carrier frequency must be positive")
        if self.n_antennas < 1:
            raise ParameterError(f"antenna count must be positive, got {self.n_antennas}")
        if not 0.0 <= self.attenuation_default < 1.0:
            raise ParameterError("default attenuation must be in [0, 1)")
        if self.region.x_min != 0.0:
            raise GeometryError("region x_min must coincide with the aperture plane x = 0")
        half_span = self.aperture / 2.0
        if self.region.y_min > -half_span or self.region.y_max < half_span:
            raise GeometryError("region must contain the full array aperture")
        for ob in self.obstacles:
            x1, x2 = ob.x_range
            y1, y2 = ob.y_range
            if not (self.region.x_min <= x1 and x2 <= self.region.x_max
                    and self.region.y_min <= y1 and y2 <= self.region.y_max):
                raise GeometryError(f"obstacle {ob} extends outside the region")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.frequency_hz

    @property
    def wavenumber(self):
        return 2.0 * math.pi / self.wavelength

    @property
    def spacing(self):
        """Antenna spacing delta = lambda / 2."""
        return self.wavelength / 2.0

    @property
    def aperture(self):
        """Aperture size L = (N - 1) * delta."""
        return (self.n_antennas - 1) * self.spacing

    @property
    def dx(self):
        return self.spacing if self.grid_step_x is None else self.grid_step_x

    @property
    def dy(self):
        return self.spacing if self.grid_step_y is None else self.grid_step_y

    def antenna_offsets(self):
        """Element offsets n; integers for odd N, half-integers for even N."""
        return np.arange(self.n_antennas) - (self.n_antennas - 1) / 2.0

    def antenna_y(self):
        return self.antenna_offsets() * self.spacing

    def to_json_dict(self):
        return {
            "frequency_hz": self.frequency_hz,
            "n_antennas": self.n_antennas,
            "region": {"x_min": self.region.x_min, "x_max": self.region.x_max,
                       "y_min": self.region.y_min, "y_max": self.region.y_max},
            "obstacles": [{"cx": o.cx, "cy": o.cy, "dx": o.dx, "dy": o.dy,
                           "attenuation": o.attenuation} for o in self.obstacles],
            "attenuation_default": self.attenuation_default,
        }

    def canonical_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def scenario_from_dict(d) -> ScenarioConfig:
    default_att = d.get("attenuation_default", 0.0)
    obstacles = tuple(
        Obstacle(o["cx"], o["cy"], o["dx"], o["dy"], o.get("attenuation", default_att))
        for o in d.get("obstacles", ())
    )
    r = d["region"]
    return ScenarioConfig(
        frequency_hz=d["frequency_hz"],
        n_antennas=d["n_antennas"],
        region=Region(r["x_min"], r["x_max"], r["y_min"], r["y_max"]),
        obstacles=obstacles,
        attenuation_default=default_att,
        grid_step_x=d.get("grid_step_x"),
        grid_step_y=d.get("grid_step_y"),
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def save_scenario(config: ScenarioConfig, path):
    with open(path, "w") as f:
        json.dump(config.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


@dataclass(frozen=True)
class GridSpec:
    """Uniform 2D lattice covering the region.

    Column i sits at x = i * dx (column 0 on the aperture plane); row j
    sits at y = y0 + j * dy with the lattice anchored so that every
    antenna position is an exact row. Row/column counts follow
    nearest-lattice covering, i.e. floor(extent / step) + 1 up to
    alignment.
    """

    n_cols: int
    n_rows: int
    dx: float
    dy: float
    y0: float

    def x_of(self, col):
        return np.asarray(col) * self.dx

    def y_of(self, row):
        return self.y0 + np.asarray(row) * self.dy

    def col_of(self, x, clip=False):
        idx = np.rint(np.asarray(x) / self.dx).astype(int)
        if clip:
            return np.clip(idx, 0, self.n_cols - 1)
        if np.any(idx < 0) or np.any(idx >= self.n_cols):
            raise GeometryError(f"x = {x} outside the grid")
        return idx

    def row_of(self, y, clip=False):
        idx = np.rint((np.asarray(y) - self.y0) / self.dy).astype(int)
        if clip:
            return np.clip(idx, 0, self.n_rows - 1)
        if np.any(idx < 0) or np.any(idx >= self.n_rows):
            raise GeometryError(f"y = {y} outside the grid")
        return idx

    def y_values(self):
        return self.y0 + np.arange(self.n_rows) * self.dy


def build_grid(config: ScenarioConfig) -> GridSpec:
    """Discretize the region onto the uniform lattice.

    Raises SamplingError when a grid step exceeds half a wavelength and
    GeometryError when antenna rows cannot be represented exactly
    (antenna spacing must be an integer multiple of the row step).
    """
    lam = config.wavelength
    tol = 1e-9 * lam
    if config.dx > lam / 2.0 + tol or config.dy > lam / 2.0 + tol:
        raise SamplingError(
            f"grid steps ({config.dx:.6g}, {config.dy:.6g}) exceed lambda/2 = {lam / 2.0:.6g}"
        )
    ratio = config.spacing / config.dy
    k = round(ratio)
    if abs(ratio - k) > 1e-9:
        raise GeometryError("antenna spacing must be an integer multiple of the row step")

    # Even arrays sit at half-integer multiples of delta; shift the
    # lattice anchor so elements still land exactly on rows.
    anchor = config.dy / 2.0 if (config.n_antennas % 2 == 0 and k % 2 == 1) else 0.0
    reg = config.region
    j_lo = round((reg.y_min - anchor) / config.dy)
    j_hi = round((reg.y_max - anchor) / config.dy)
    n_cols = round(reg.x_max / config.dx) + 1
    grid = GridSpec(
        n_cols=n_cols,
        n_rows=j_hi - j_lo + 1,
        dx=config.dx,
        dy=config.dy,
        y0=anchor + j_lo * config.dy,
    )
    rows = antenna_rows(config, grid)
    if rows[0] < 0 or rows[-1] >= grid.n_rows:
        raise GeometryError("array aperture does not fit inside the grid")
    return grid


def antenna_rows(config: ScenarioConfig, grid: GridSpec) -> np.ndarray:
    """Row indices of the N antenna elements (exact lattice positions)."""
    idx = (config.antenna_y() - grid.y0) / grid.dy
    rows = np.rint(idx).astype(int)
    if np.max(np.abs(idx - rows)) > 1e-6:
        raise GeometryError("antenna positions do not coincide with grid rows")
    return rows


def blockage_mask_row(config: ScenarioConfig, grid: GridSpec, x_index: int) -> np.ndarray:
    """Amplitude attenuation row B(x_i, :) for one grid column.

    Cells whose center lies inside any obstacle rectangle (boundaries
    closed) take the obstacle attenuation; overlapping obstacles resolve
    to the minimum. Everywhere else the row is 1.
    """
    if not 0 <= x_index < grid.n_cols:
        raise GeometryError(f"x_index {x_index} outside the grid")
    row = np.ones(grid.n_rows)
    x = x_index * grid.dx
    y = grid.y_values()
    for ob in config.obstacles:
        x1, x2 = ob.x_range
        if x1 <= x <= x2:
            y1, y2 = ob.y_range
            inside = (y >= y1) & (y <= y2)
            row[inside] = np.minimum(row[inside], ob.attenuation)
    return row


def masked_columns(config: ScenarioConfig, grid: GridSpec) -> np.ndarray:
    """Sorted column indices whose blockage row differs from all-ones."""
    cols = set()
    for ob in config.obstacles:
        x1, x2 = ob.x_range
        lo = int(np.ceil(x1 / grid.dx - 1e-12))
        hi = int(np.floor(x2 / grid.dx + 1e-12))
        cols.update(range(max(lo, 0), min(hi, grid.n_cols - 1) + 1))
    return np.array(sorted(cols), dtype=int)


def _segments_hit_box(x0, y0, x1, y1, box) -> np.ndarray:
    """Vectorized segment vs axis-aligned rectangle test (slab clipping).

    Touching the boundary counts as a hit. Endpoints are (x0, y0[i]) and
    (x1, y1); returns a boolean array over i.
    """
    bx1, bx2, by1, by2 = box
    y0 = np.asarray(y0, dtype=float)
    n = y0.shape[0]
    t_lo = np.zeros(n)
    t_hi = np.ones(n)
    hit = np.ones(n, dtype=bool)
    for p0, d, lo, hi in ((np.full(n, x0), np.full(n, x1 - x0), bx1, bx2),
                          (y0, y1 - y0, by1, by2)):
        parallel = d == 0.0
        hit &= ~parallel | ((p0 >= lo) & (p0 <= hi))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - p0) / d
            t2 = (hi - p0) / d
        t1, t2 = np.minimum(t1, t2), np.maximum(t1, t2)
        t1 = np.where(parallel, 0.0, t1)
        t2 = np.where(parallel, 1.0, t2)
        t_lo = np.maximum(t_lo, t1)
        t_hi = np.minimum(t_hi, t2)
    return hit & (t_lo <= t_hi)


def blockage_ratio(config: ScenarioConfig, receiver) -> float:
    """Fraction of antennas whose line of sight to the receiver crosses an obstacle."""
    xr, yr = receiver
    if xr <= 0:
        raise GeometryError("receiver must be in front of the aperture plane (x > 0)")
    if not config.region.contains(xr, yr):
        raise GeometryError(f"receiver {receiver} outside the region")
    ys = config.antenna_y()
    blocked = np.zeros(config.n_antennas, dtype=bool)
    for ob in config.obstacles:
        box = (*ob.x_range, *ob.y_range)
        blocked |= _segments_hit_box(0.0, ys, xr, yr, box)
    return float(np.count_nonzero(blocked)) / config.n_antennas
