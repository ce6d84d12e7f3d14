"""Phase profiles and codeword generation for steering, focusing, and curved beams.

A beam is parameterized by a steering angle theta, a focusing distance r
(infinity allowed), and a curvature coefficient c (units 1/m). The
per-antenna phase nests the three effects:

    phi(n) = -kappa*n*delta*sin(theta)
             + kappa*cos(theta)^2/(2r) * (n*delta)^2
             - (2*pi*c)^3 * (n*delta)^3 / 3

so c = 0 degenerates to a focusing beam and additionally r = inf to a
plain steering beam. Codewords are unit-norm phase-only vectors of
length N. Codebooks sample sin(theta) uniformly, r uniformly, and c
uniformly and symmetrically about 0; all indices are 0-based.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class BeamParams:
    """Beam triple (theta [rad], r [m] with inf allowed, c [1/m])."""

    theta: float
    r: float
    c: float

    def __post_init__(self):
        if not -math.pi / 2 <= self.theta <= math.pi / 2:
            raise ParameterError(f"theta must lie in [-pi/2, pi/2], got {self.theta}")
        if not self.r > 0:
            raise ParameterError(f"focusing distance must be positive (inf allowed), got {self.r}")


def airy_phase(n, params: BeamParams, kappa: float, delta: float):
    """Per-antenna phase in radians; accepts scalar or array antenna index n."""
    n = np.asarray(n)
    nd = n * delta
    quad = 0.0 if math.isinf(params.r) else kappa * math.cos(params.theta) ** 2 / (2.0 * params.r)
    phase = (-kappa * nd * math.sin(params.theta)
             + quad * nd ** 2
             - (2.0 * math.pi * params.c) ** 3 * nd ** 3 / 3.0)
    return phase if phase.shape else float(phase)


def antenna_offsets(n_antennas: int) -> np.ndarray:
    """Symmetric element offsets; integers for odd N, half-integers for even N."""
    if n_antennas < 1:
        raise ParameterError(f"antenna count must be positive, got {n_antennas}")
    return np.arange(n_antennas) - (n_antennas - 1) / 2.0


def make_codeword(params: BeamParams, n_antennas: int, kappa: float, delta: float) -> np.ndarray:
    """Unit-norm excitation vector, element n = exp(j*phi(n)) / sqrt(N)."""
    idx = antenna_offsets(n_antennas)
    return np.exp(1j * airy_phase(idx, params, kappa, delta)) / math.sqrt(n_antennas)


@dataclass(frozen=True)
class CodebookSpec:
    """Sampling counts and ranges; defaults follow the evaluation setup."""

    l1: int
    l2: int
    l3: int
    theta_min: float = -math.pi / 2
    theta_max: float = math.pi / 2
    r_min: float = 0.5
    r_max: float = 5.0
    c_max: float = 5.0

    def to_json_dict(self):
        return {"l1": self.l1, "l2": self.l2, "l3": self.l3,
                "theta_min": self.theta_min, "theta_max": self.theta_max,
                "r_min": self.r_min, "r_max": self.r_max, "c_max": self.c_max}

    def canonical_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


def spec_from_dict(d) -> CodebookSpec:
    defaults = CodebookSpec(2, 2, 2)
    return CodebookSpec(
        l1=d["l1"], l2=d["l2"], l3=d["l3"],
        theta_min=d.get("theta_min", defaults.theta_min),
        theta_max=d.get("theta_max", defaults.theta_max),
        r_min=d.get("r_min", defaults.r_min),
        r_max=d.get("r_max", defaults.r_max),
        c_max=d.get("c_max", defaults.c_max),
    )


def load_codebook_spec(path) -> CodebookSpec:
    with open(path) as f:
        return spec_from_dict(json.load(f))


class Codebook:
    """Lazily generated codeword family over sampled (theta, r, c) axes.

    Flat index order is l1-major: flat = (l1 * L2 + l2) * L3 + l3. The
    sweep machinery relies on this order for tie-breaking and for
    overhead-versus-n curves.
    """

    def __init__(self, theta, r, c, n_antennas, kappa, delta):
        self.theta = np.asarray(theta, dtype=float)
        self.r = np.asarray(r, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.n_antennas = n_antennas
        self.kappa = kappa
        self.delta = delta
        self._materialized = None

    @property
    def dims(self):
        return len(self.theta), len(self.r), len(self.c)

    def __len__(self):
        l1, l2, l3 = self.dims
        return l1 * l2 * l3

    def flat_index(self, l1, l2, l3):
        d1, d2, d3 = self.dims
        if not (0 <= l1 < d1 and 0 <= l2 < d2 and 0 <= l3 < d3):
            raise ParameterError(f"index ({l1}, {l2}, {l3}) outside dims {self.dims}")
        return (l1 * d2 + l2) * d3 + l3

    def indices(self, flat):
        _, d2, d3 = self.dims
        flat = np.asarray(flat)
        if np.any(flat < 0) or np.any(flat >= len(self)):
            raise ParameterError("flat index out of range")
        l3 = flat % d3
        l2 = (flat // d3) % d2
        l1 = flat // (d2 * d3)
        return l1, l2, l3

    def params(self, flat) -> BeamParams:
        l1, l2, l3 = self.indices(flat)
        return BeamParams(float(self.theta[l1]), float(self.r[l2]), float(self.c[l3]))

    def codewords(self, flat) -> np.ndarray:
        """Vectorized generation: flat may be a scalar or an index array.

        Returns shape (len(flat), N) for arrays, (N,) for scalars.
        """
        scalar = np.isscalar(flat)
        flat = np.atleast_1d(np.asarray(flat, dtype=int))
        l1, l2, l3 = self.indices(flat)
        th = self.theta[l1][:, None]
        rr = self.r[l2][:, None]
        cc = self.c[l3][:, None]
        nd = antenna_offsets(self.n_antennas)[None, :] * self.delta
        with np.errstate(divide="ignore"):
            quad = np.where(np.isinf(rr), 0.0, self.kappa * np.cos(th) ** 2 / (2.0 * rr))
        phase = (-self.kappa * nd * np.sin(th)
                 + quad * nd ** 2
                 - (2.0 * math.pi * cc) ** 3 * nd ** 3 / 3.0)
        cw = np.exp(1j * phase) / math.sqrt(self.n_antennas)
        return cw[0] if scalar else cw

    def codeword(self, l1, l2, l3) -> np.ndarray:
        return self.codewords(self.flat_index(l1, l2, l3))

    def materialize(self) -> np.ndarray:
        if self._materialized is None:
            self._materialized = self.codewords(np.arange(len(self)))
        return self._materialized

    def focusing_subcodebook(self) -> "Codebook":
        """The c = 0 slice; raises when 0 is not a sampled curvature."""
        zero = np.flatnonzero(self.c == 0.0)
        if zero.size == 0:
            raise ParameterError("curvature axis does not contain c = 0")
        return Codebook(self.theta, self.r, [0.0], self.n_antennas, self.kappa, self.delta)

    def c_zero_index(self) -> int:
        zero = np.flatnonzero(self.c == 0.0)
        if zero.size == 0:
            raise ParameterError("curvature axis does not contain c = 0")
        return int(zero[0])


def build_codebook(spec: CodebookSpec, n_antennas: int, kappa: float, delta: float) -> Codebook:
    """Sample axes per the uniform rules and wrap them in a Codebook.

    l3 = 1 is the focusing degeneracy and yields the singleton axis {0};
    all other counts must be at least 2. Midpoint symmetry puts c = 0 on
    the curvature axis exactly whenever l3 is odd.
    """
    if spec.l1 < 2 or spec.l2 < 2 or spec.l3 < 1:
        raise ParameterError(f"unsupported codebook dims ({spec.l1}, {spec.l2}, {spec.l3})")
    if spec.l3 == 1:
        c = np.array([0.0])
    else:
        step = 2.0 * spec.c_max / (spec.l3 - 1)
        c = -spec.c_max + np.arange(spec.l3) * step
        mid, rem = divmod(spec.l3 - 1, 2)
        if rem == 0:
            c[mid] = 0.0
    s_min, s_max = math.sin(spec.theta_min), math.sin(spec.theta_max)
    if s_min >= s_max or spec.r_min >= spec.r_max or spec.r_min <= 0:
        raise ParameterError("inverted or non-positive sampling range")
    sin_theta = s_min + np.arange(spec.l1) * (s_max - s_min) / (spec.l1 - 1)
    theta = np.arcsin(np.clip(sin_theta, -1.0, 1.0))
    r = spec.r_min + np.arange(spec.l2) * (spec.r_max - spec.r_min) / (spec.l2 - 1)
    return Codebook(theta, r, c, n_antennas, kappa, delta)


def build_dft_codebook(n_antennas: int, kappa: float, delta: float) -> Codebook:
    """N steering-only codewords on the uniform sin(theta) grid over [-1, 1].

    The angle grid coincides with the default curved-beam codebook's
    angle axis, so sweep bin l aligns with angle label l1 = l. Note that
    for odd N the two endpoint codewords alias (sin = -1 and sin = +1
    differ by a 2*pi*n phase at half-wavelength spacing).
    """
    if n_antennas < 2:
        raise ParameterError(f"antenna count must be at least 2, got {n_antennas}")
    sin_theta = -1.0 + np.arange(n_antennas) * 2.0 / (n_antennas - 1)
    theta = np.arcsin(np.clip(sin_theta, -1.0, 1.0))
    return Codebook(theta, [np.inf], [0.0], n_antennas, kappa, delta)
