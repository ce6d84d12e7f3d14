import math

import numpy as np
import pytest
import scipy.fft as sfft

from airybeamlab.codebooks import BeamParams, make_codeword
from airybeamlab.errors import (BadMagicError, GeometryError, TruncatedFileError,
                                UnsupportedSceneError)
from airybeamlab.field import (beam_gain, direct_field, fresnel_field, line_source_gauge,
                               propagate, read_field, transfer_function, write_field)
from airybeamlab.scenario import (Obstacle, Region, ScenarioConfig, antenna_rows,
                                  build_grid)

F100 = 100e9


def small_config(x_max=1.5, y_half=0.35, obstacles=()):
    return ScenarioConfig(F100, 64, Region(0.0, x_max, -y_half, y_half),
                          obstacles=obstacles)


def random_beam_codewords(cfg, count, seed=0):
    rng = np.random.default_rng(seed)
    return np.array([
        make_codeword(BeamParams(float(np.arcsin(rng.uniform(-0.25, 0.25))),
                                 float(rng.uniform(0.7, 5.0)),
                                 float(rng.uniform(-5.0, 5.0))),
                      cfg.n_antennas, cfg.wavenumber, cfg.spacing)
        for _ in range(count)])


def snapped_probes(grid, rng, n, x_range, y_range):
    pts = np.column_stack([rng.uniform(*x_range, n), rng.uniform(*y_range, n)])
    return np.column_stack([grid.x_of(grid.col_of(pts[:, 0])),
                            grid.y_of(grid.row_of(pts[:, 1]))])


# --- beam_gain ---------------------------------------------------------------

def test_beam_gain_values():
    assert beam_gain(0.0) == 0.0
    assert beam_gain(1 + 1j) == pytest.approx(2.0)
    for phi in (0.1, 1.0, 2.5):
        assert beam_gain(np.exp(1j * phi)) == pytest.approx(1.0)


# --- transfer function -------------------------------------------------------

def test_transfer_function_normal_incidence():
    lam = 3e-3
    kappa = 2 * math.pi / lam
    dx = 1.7e-3
    assert transfer_function(0.0, dx, lam) == pytest.approx(np.exp(-1j * kappa * dx))


def test_transfer_function_cutoff_boundary():
    lam = 3e-3
    assert transfer_function(1.0 / lam, 2e-3, lam) == pytest.approx(1.0)


def test_transfer_function_evanescent_branch():
    # lambda^2 f^2 = 2 with kappa * dx = 1 decays to exp(-1)
    lam = 3e-3
    kappa = 2 * math.pi / lam
    f = math.sqrt(2.0) / lam
    h = transfer_function(f, 1.0 / kappa, lam)
    assert h == pytest.approx(math.exp(-1.0))
    assert h.imag == 0.0


def test_transfer_function_magnitude_never_exceeds_one():
    lam = 3e-3
    f = np.linspace(-2.5 / lam, 2.5 / lam, 501)
    h = transfer_function(f, 1e-3, lam)
    assert np.all(np.abs(h) <= 1.0 + 1e-12)


def test_transfer_function_rejects_nonpositive_step():
    with pytest.raises(GeometryError):
        transfer_function(0.0, 0.0, 3e-3)


# --- direct (point-source superposition) oracle ------------------------------

def test_direct_field_single_element():
    cfg = ScenarioConfig(F100, 1, Region(0.0, 1.0, -0.2, 0.2))
    kappa, delta = cfg.wavenumber, cfg.spacing
    x = 0.5
    got = direct_field(np.array([1.0 + 0j]), (x, 0.0), cfg)
    expect = np.exp(-1j * kappa * x) / (2 * np.pi * x) * (1j * kappa + 1 / x) * delta
    assert got == pytest.approx(expect)


def test_direct_field_zero_aperture():
    cfg = small_config()
    assert direct_field(np.zeros(64, dtype=complex), (0.7, 0.1), cfg) == 0.0


def _supersampled(cfg, ap, point, oversample=8):
    # delta/oversample Riemann sum of the same kernel, aperture
    # interpolated as piecewise-constant around each element
    kappa, delta = cfg.wavenumber, cfg.spacing
    sub = (np.arange(oversample) - (oversample - 1) / 2) / oversample * delta
    y0 = (cfg.antenna_y()[:, None] + sub[None, :]).ravel()
    r = np.hypot(point[0], point[1] - y0)
    kern = (np.exp(-1j * kappa * r) * point[0] / (2 * np.pi * r ** 2)
            * (1j * kappa + 1 / r) * (delta / oversample))
    return np.sum(np.repeat(ap, oversample) * kern)


def test_direct_field_matches_supersampled_quadrature():
    cfg = small_config()
    ap = np.full(64, 1 / 8.0, dtype=complex)
    # paraxial probe: kernel varies ~0.3 rad per element cell
    coarse = direct_field(ap, (1.0, 0.1), cfg)
    fine = _supersampled(cfg, ap, (1.0, 0.1))
    assert abs(abs(coarse) - abs(fine)) / abs(fine) < 0.01
    # oblique probe: ~0.9 rad per cell, midpoint-rule error grows to a few %
    coarse = direct_field(ap, (1.0, 0.3), cfg)
    fine = _supersampled(cfg, ap, (1.0, 0.3))
    assert abs(abs(coarse) - abs(fine)) / abs(fine) < 0.05


def test_direct_field_rejects_obstacles_and_bad_points():
    cfg = small_config(obstacles=(Obstacle(0.5, 0.0, 0.1, 0.1, 0.0),))
    with pytest.raises(UnsupportedSceneError):
        direct_field(np.ones(64, dtype=complex), (1.0, 0.0), cfg)
    with pytest.raises(GeometryError):
        direct_field(np.ones(64, dtype=complex), (-1.0, 0.0), small_config())


# --- paraxial (quadratic-phase) oracle ---------------------------------------

def test_fresnel_field_zero_aperture():
    cfg = small_config()
    assert fresnel_field(np.zeros(64, dtype=complex), (0.7, 0.1), cfg) == 0.0


def test_fresnel_field_single_element_magnitude():
    cfg = ScenarioConfig(F100, 1, Region(0.0, 1.0, -0.2, 0.2))
    x = 0.4
    got = fresnel_field(np.array([1.0 + 0j]), (x, 0.0), cfg)
    assert abs(got) == pytest.approx(cfg.spacing / (cfg.wavelength * x))


def test_fresnel_matches_direct_at_focus():
    cfg = small_config(x_max=2.5)
    cw = make_codeword(BeamParams(0.0, 2.0, 0.0), 64, cfg.wavenumber, cfg.spacing)
    d = direct_field(cw, (2.0, 0.0), cfg)
    f = fresnel_field(cw, (2.0, 0.0), cfg)
    assert abs(abs(f) - abs(d)) / abs(d) < 0.03


# --- propagate ---------------------------------------------------------------

def test_propagate_free_space_matches_direct_oracle():
    cfg = small_config()
    grid = build_grid(cfg)
    codes = random_beam_codewords(cfg, 4, seed=7)
    probes = snapped_probes(grid, np.random.default_rng(8), 80, (0.35, 1.3), (-0.22, 0.22))
    asm = np.abs(propagate(codes, cfg, grid, keep=probes))
    direct = np.abs(direct_field(codes, probes, cfg))
    err = np.linalg.norm(asm - direct, axis=1) / np.linalg.norm(direct, axis=1)
    assert np.all(err <= 0.05)


def test_propagate_total_occlusion_zeroes_downstream():
    # 0.34 rounds inward on the even-array lattice, so a region-spanning
    # wall covers every grid row, and its edge rows seal the padded margin
    wall = Obstacle(0.5, 0.0, 0.05, 0.68, 0.0)
    cfg = small_config(y_half=0.34, obstacles=(wall,))
    grid = build_grid(cfg)
    assert np.all(np.abs(grid.y_values()) <= 0.34)
    cw = make_codeword(BeamParams(0.0, math.inf, 0.0), 64, cfg.wavenumber, cfg.spacing)
    probes = snapped_probes(grid, np.random.default_rng(0), 20, (0.6, 1.3), (-0.28, 0.28))
    vals = propagate(cw, cfg, grid, keep=probes)
    assert np.all(vals == 0.0)


def test_propagate_partial_attenuation_reduces_energy():
    ob = Obstacle(0.5, 0.0, 0.0015, 0.68, 0.5)  # one-slice amplitude mask
    cfg_b = small_config(obstacles=(ob,))
    cfg_f = small_config()
    grid = build_grid(cfg_b)
    cw = make_codeword(BeamParams(0.0, 1.0, 0.0), 64, cfg_b.wavenumber, cfg_b.spacing)
    col = grid.n_cols - 1
    pts = np.column_stack([np.full(grid.n_rows, col * grid.dx), grid.y_values()])
    blocked = np.abs(propagate(cw, cfg_b, grid, keep=pts, gauge="none")) ** 2
    free = np.abs(propagate(cw, cfg_f, grid, keep=pts, gauge="none")) ** 2
    assert blocked.sum() < free.sum()


def test_propagate_linearity():
    cfg = small_config(obstacles=(Obstacle(0.5, 0.1, 0.1, 0.2, 0.3),))
    grid = build_grid(cfg)
    codes = random_beam_codewords(cfg, 2, seed=3)
    a, b = 0.7 - 0.2j, -1.1 + 0.4j
    probes = snapped_probes(grid, np.random.default_rng(4), 30, (0.3, 1.4), (-0.3, 0.3))
    lhs = propagate(a * codes[0] + b * codes[1], cfg, grid, keep=probes)
    rhs = (a * propagate(codes[0], cfg, grid, keep=probes)
           + b * propagate(codes[1], cfg, grid, keep=probes))
    scale = np.abs(rhs).max()
    assert np.abs(lhs - rhs).max() / scale < 1e-10


def test_collapsed_step_equals_unit_steps():
    # one spectral step over k columns vs k single-column steps
    lam = 2.99792458e-3
    dy = lam / 2
    m = 1024
    rng = np.random.default_rng(1)
    state = np.zeros(m, dtype=complex)
    state[480:545] = np.exp(2j * np.pi * rng.random(65))
    f = sfft.fftfreq(m, d=dy)
    k = 137
    one = sfft.ifft(sfft.fft(state) * transfer_function(f, k * dy, lam))
    many = state.copy()
    h1 = transfer_function(f, dy, lam)
    for _ in range(k):
        many = sfft.ifft(sfft.fft(many) * h1)
    assert np.abs(one - many).max() / np.abs(one).max() < 1e-8


def test_propagate_collapse_path_matches_per_column_readout():
    # reading a far column directly equals visiting every column on the way
    cfg = small_config(x_max=0.6)
    grid = build_grid(cfg)
    cw = random_beam_codewords(cfg, 1, seed=5)[0]
    x_far = (grid.n_cols - 1) * grid.dx
    direct_hop = propagate(cw, cfg, grid, keep=[(x_far, 0.0)])
    every_col = propagate(cw, cfg, grid, keep="all")[grid.n_cols - 1, grid.row_of(0.0)]
    assert abs(direct_hop[0] - every_col) / abs(every_col) < 1e-8


def test_free_space_energy_never_grows():
    cfg = small_config()
    grid = build_grid(cfg)
    cw = random_beam_codewords(cfg, 1, seed=9)[0]
    m = 2048
    state = np.zeros(m, dtype=complex)
    rows = antenna_rows(cfg, grid) + (m - grid.n_rows) // 2
    state[rows] = cw
    f = sfft.fftfreq(m, d=grid.dy)
    h = transfer_function(f, grid.dx, cfg.wavelength)
    energies = [np.sum(np.abs(state) ** 2) * grid.dy]
    for _ in range(400):
        state = sfft.ifft(sfft.fft(state) * h)
        energies.append(np.sum(np.abs(state) ** 2) * grid.dy)
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-12 * energies[0])


def test_gauge_is_a_fixed_pointwise_factor():
    cfg = small_config()
    grid = build_grid(cfg)
    cw = random_beam_codewords(cfg, 1, seed=11)[0]
    probes = snapped_probes(grid, np.random.default_rng(12), 25, (0.3, 1.4), (-0.3, 0.3))
    lined = propagate(cw, cfg, grid, keep=probes)
    raw = propagate(cw, cfg, grid, keep=probes, gauge="none")
    factor = line_source_gauge(probes[:, 0], probes[:, 1], cfg.wavelength)
    np.testing.assert_allclose(lined, raw * factor, rtol=1e-12)


def test_propagate_deterministic_across_workers():
    cfg = small_config(obstacles=(Obstacle(0.5, 0.0, 0.1, 0.2, 0.0),))
    grid = build_grid(cfg)
    codes = random_beam_codewords(cfg, 3, seed=13)
    probes = snapped_probes(grid, np.random.default_rng(14), 10, (0.3, 1.4), (-0.3, 0.3))
    a = propagate(codes, cfg, grid, keep=probes, workers=None)
    b = propagate(codes, cfg, grid, keep=probes, workers=2)
    assert np.array_equal(a, b)


def test_propagate_rejects_probe_outside_grid():
    cfg = small_config()
    grid = build_grid(cfg)
    cw = np.ones(64, dtype=complex) / 8
    with pytest.raises(GeometryError):
        propagate(cw, cfg, grid, keep=[(2.0, 0.0)])


# --- field dump --------------------------------------------------------------

def test_field_dump_roundtrip(tmp_path):
    cfg = small_config(x_max=0.3, y_half=0.25)
    grid = build_grid(cfg)
    cw = random_beam_codewords(cfg, 1, seed=2)[0]
    field = propagate(cw, cfg, grid, keep="all", dtype=np.complex64)
    path = tmp_path / "field.bin"
    write_field(path, field, grid)
    back, dx, dy = read_field(path)
    assert (dx, dy) == (grid.dx, grid.dy)
    np.testing.assert_array_equal(back, field.astype(np.complex64))


def test_field_dump_bad_magic(tmp_path):
    path = tmp_path / "field.bin"
    path.write_bytes(b"NOTMAGIC" + b"\0" * 64)
    with pytest.raises(BadMagicError):
        read_field(path)


def test_field_dump_truncation(tmp_path):
    cfg = small_config(x_max=0.1, y_half=0.25)
    grid = build_grid(cfg)
    cw = np.ones(64, dtype=complex) / 8
    field = propagate(cw, cfg, grid, keep="all", dtype=np.complex64)
    path = tmp_path / "field.bin"
    write_field(path, field, grid)
    data = path.read_bytes()
    path.write_bytes(data[:-17])
    with pytest.raises(TruncatedFileError):
        read_field(path)
