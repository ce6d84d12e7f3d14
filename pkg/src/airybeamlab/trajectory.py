"""Analytic trajectory of curved beams: exact caustic, paraxial form, reach limit.

Rays leave the aperture point (0, y0) normal to the local phase front;
the beam's curved trajectory is the envelope (caustic) of that ray
family. With A(y0) = phi'(y0)/kappa and B(y0) = phi''(y0)/kappa the
stationarity conditions give the parametric caustic

    x_c = (1 - A^2)^(3/2) / B,    y_c = y0 - A (1 - A^2) / B.

Points with B = 0, |A| >= 1, or x_c <= 0 carry no physical caustic and
are flagged invalid rather than dropped. In the paraxial regime the
curve admits the closed form implemented by ``paraxial_trajectory``,
whose tangent rays from the aperture edges bound the distance over
which the curve can be sustained (``max_range``).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .codebooks import BeamParams
from .errors import ParameterError


@dataclass(frozen=True)
class CausticPoint:
    """One caustic sample: source ordinate y0, point (x_c, y_c), validity."""

    y0: float
    x_c: float
    y_c: float
    valid: bool


def phase_derivatives(y0, params: BeamParams, kappa: float):
    """(A, B) = (phi', phi'') / kappa of the continuous aperture phase at y0."""
    y0 = np.asarray(y0, dtype=float)
    cos2 = math.cos(params.theta) ** 2
    inv_r = 0.0 if math.isinf(params.r) else 1.0 / params.r
    cube = (2.0 * math.pi * params.c) ** 3
    a = -math.sin(params.theta) + cos2 * inv_r * y0 - cube * y0 ** 2 / kappa
    b = cos2 * inv_r - 2.0 * cube * y0 / kappa
    return a, b


def caustic_curve(params: BeamParams, kappa: float, half_span: float, samples: int):
    """Sample the exact caustic for y0 uniform over [-half_span, half_span].

    Returns the list of CausticPoint sorted by x_c (invalid points,
    whose coordinates may be nan, sort last). ``samples`` of 4N is a
    good default for an N-element array.
    """
    if samples < 1:
        raise ParameterError("need at least one caustic sample")
    if params.c == 0.0 and math.isinf(params.r):
        raise ParameterError("curvature-free collimated beam has no caustic")
    y0 = np.linspace(-half_span, half_span, samples)
    a, b = phase_derivatives(y0, params, kappa)
    with np.errstate(divide="ignore", invalid="ignore"):
        one_m_a2 = 1.0 - a ** 2
        x_c = np.where(b != 0.0, one_m_a2 ** 1.5 / b, np.nan)
        y_c = np.where(b != 0.0, y0 - a * one_m_a2 / b, np.nan)
    valid = (b != 0.0) & (np.abs(a) < 1.0) & (x_c > 0.0)
    x_c = np.where(valid, x_c, np.nan)
    y_c = np.where(valid, y_c, np.nan)
    order = np.argsort(x_c)  # nan sorts last
    return [CausticPoint(float(y0[i]), float(x_c[i]), float(y_c[i]), bool(valid[i]))
            for i in order]


def caustic_arrays(points):
    """Split a CausticPoint list into (y0, x_c, y_c, valid) arrays."""
    y0 = np.array([p.y0 for p in points])
    x_c = np.array([p.x_c for p in points])
    y_c = np.array([p.y_c for p in points])
    valid = np.array([p.valid for p in points])
    return y0, x_c, y_c, valid


def write_caustic_csv(points, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["y0", "x_c", "y_c", "valid"])
        for p in points:
            w.writerow([f"{p.y0:.10g}", f"{p.x_c:.10g}", f"{p.y_c:.10g}", int(p.valid)])


def paraxial_trajectory(x_c, params: BeamParams, kappa: float):
    """Closed-form small-angle trajectory y_c(x_c); requires c != 0 and x_c > 0."""
    x_c = np.asarray(x_c, dtype=float)
    if params.c == 0.0:
        raise ParameterError("paraxial trajectory requires a nonzero curvature")
    if np.any(x_c <= 0.0):
        raise ParameterError("trajectory is defined for x_c > 0")
    th = params.theta
    c3 = 32.0 * math.pi ** 3 * params.c ** 3
    inv_r = 0.0 if math.isinf(params.r) else 1.0 / params.r
    y = (x_c * math.sin(th)
         - kappa * x_c * math.cos(th) ** 4 * inv_r ** 2 / c3
         - kappa / (c3 * x_c)
         + 2.0 * kappa * math.cos(th) ** 2 * inv_r / c3)
    return y if y.shape else float(y)


def tangent_slope(x_c, params: BeamParams, kappa: float):
    """dy_c/dx_c of the paraxial trajectory at x_c (slope of the tangent ray)."""
    x_c = np.asarray(x_c, dtype=float)
    if params.c == 0.0:
        raise ParameterError("tangent slope requires a nonzero curvature")
    if np.any(x_c <= 0.0):
        raise ParameterError("trajectory is defined for x_c > 0")
    th = params.theta
    c3 = 32.0 * math.pi ** 3 * params.c ** 3
    inv_r = 0.0 if math.isinf(params.r) else 1.0 / params.r
    m = (math.sin(th)
         - kappa * math.cos(th) ** 4 * inv_r ** 2 / c3
         + kappa / (c3 * x_c ** 2))
    return m if m.shape else float(m)


def max_range(params: BeamParams, kappa: float, aperture: float) -> float:
    """Largest distance the curved trajectory is sustained by the aperture.

    Evaluates the two edge-ray bounds; a non-positive denominator means
    that edge never limits the curve and contributes +inf. The c -> 0
    limit of both branches is r / cos(theta)^2.
    """
    if math.isinf(params.r):
        raise ParameterError("max range requires a finite focusing distance")
    cos2 = math.cos(params.theta) ** 2
    edge = 8.0 * math.pi ** 3 * params.c ** 3 * params.r * aperture
    best = -math.inf
    for denom in (kappa * cos2 + edge, kappa * cos2 - edge):
        best = max(best, kappa * params.r / denom if denom > 0.0 else math.inf)
    return best
