"""Radial quadrature shared by every warpbench module.

Cumulative integrals on the log-uniform grid integrate the not-a-knot cubic
spline of the integrand in s = log r exactly, so the derivative of a
cumulative integral at a node returns the integrand at that node. Tail
integrals accumulate from the outer end inward to avoid cancellation.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

logger = logging.getLogger(__name__)

RTOL = 1e-8


def cumulative_left(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """∫_{s[0]}^{s[i]} y ds for every node i."""
    return CubicSpline(s, y).antiderivative()(s)


def cumulative_right(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """∫_{s[i]}^{s[-1]} y ds for every node i, accumulated from the right end."""
    flipped = CubicSpline(-s[::-1], y[::-1]).antiderivative()
    return flipped(-s[::-1])[::-1]


def node_derivative(s: np.ndarray, values: np.ndarray) -> np.ndarray:
    """d/ds of the cubic spline through (s, values) at the nodes."""
    return CubicSpline(s, values)(s, 1)


def richardson_error(s: np.ndarray, y: np.ndarray, from_right: bool = False) -> float:
    """Relative error estimate |I_h − I_2h| / 15 of a cumulative integral.

    The half-resolution integral reuses every other node; the grid must have
    an odd number of points so both ends are shared.
    """
    cumulative = cumulative_right if from_right else cumulative_left
    fine = cumulative(s, y)
    coarse = cumulative(s[::2], y[::2])
    scale = float(np.max(np.abs(fine))) or 1.0
    return float(np.max(np.abs(fine[::2] - coarse))) / 15.0 / scale


def verify_cumulative(
    s: np.ndarray, y: np.ndarray, label: str, from_right: bool = False, rtol: float = RTOL
) -> float:
    """Run the Richardson check and log when it exceeds the tolerance."""
    if len(s) % 2 == 0:
        s, y = s[:-1], y[:-1]
    err = richardson_error(s, y, from_right=from_right)
    if err > rtol:
        logger.warning(f"Quadrature for {label}: Richardson estimate {err:.2e} exceeds {rtol:.0e}")
    else:
        logger.debug(f"Quadrature for {label}: Richardson estimate {err:.2e}")
    return err


def _breakpoints(a: float, b: float) -> list[float]:
    points = [a]
    lo = math.floor(math.log10(a)) + 1 if a > 0 else -6
    hi = math.ceil(math.log10(b)) if b > 0 else lo
    points.extend(10.0**k for k in range(lo, hi) if a < 10.0**k < b)
    points.append(b)
    return points


def integrate(fn: Callable[[float], float], a: float, b: float, rtol: float = RTOL) -> float:
    """Adaptive quadrature of fn over [a, b], split at powers of ten."""
    if b <= a:
        return 0.0
    total = 0.0
    pts = _breakpoints(a, b)
    for lo, hi in zip(pts[:-1], pts[1:]):
        value, _ = quad(fn, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
        total += value
    return total


def tail_slope(r: np.ndarray, y: np.ndarray, decades: float = 1.0) -> float:
    """Log-log slope of y over the outermost decades of the grid (nan if y vanishes there)."""
    y = np.asarray(y, dtype=np.float64)
    mask = (r >= r[-1] / 10**decades) & np.isfinite(y) & (y > 0)
    if mask.sum() < 4:
        return math.nan
    return float(np.polyfit(np.log(r[mask]), np.log(y[mask]), 1)[0])
