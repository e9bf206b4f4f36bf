"""Closed-form warping profiles: euclidean, hyperbolic, smoothed cone, perturbed, scaled."""

from __future__ import annotations

import math
from typing import Any

import numpy as np
from scipy.special import erf

from warpbench.errors import BadParameters
from warpbench.models import ProfileKind
from warpbench.profiles.base import ArrayLike, WarpingProfile

# Largest exponent we let w^{n-1} reach before truncating the radial grid.
_LOG_OVERFLOW_GUARD = 650.0


class Euclidean(WarpingProfile):
    """w(r) = r."""

    kind = ProfileKind.EUCLIDEAN

    def __init__(self):
        super().__init__(tail_exponent=1.0, tail_coefficient=1.0)

    def w(self, r: ArrayLike) -> ArrayLike:
        return np.asarray(r, dtype=np.float64) * 1.0

    def dw(self, r: ArrayLike) -> ArrayLike:
        return np.ones_like(np.asarray(r, dtype=np.float64))

    def d2w(self, r: ArrayLike) -> ArrayLike:
        return np.zeros_like(np.asarray(r, dtype=np.float64))

    def one_minus_dw2(self, r: ArrayLike) -> ArrayLike:
        return np.zeros_like(np.asarray(r, dtype=np.float64))

    @property
    def d3w0(self) -> float:
        return 0.0

    def params(self) -> dict[str, Any]:
        return {}


class Hyperbolic(WarpingProfile):
    """w(r) = sinh(κr)/κ, sectional curvature −κ²."""

    kind = ProfileKind.HYPERBOLIC

    def __init__(self, kappa: float = 1.0):
        if kappa <= 0:
            raise BadParameters(f"hyperbolic kappa must be positive, got {kappa}")
        self.kappa = float(kappa)
        super().__init__(tail_exponent=math.inf, tail_coefficient=1.0 / (2.0 * kappa))

    def w(self, r: ArrayLike) -> ArrayLike:
        with np.errstate(over="ignore"):
            return np.sinh(self.kappa * np.asarray(r, dtype=np.float64)) / self.kappa

    def dw(self, r: ArrayLike) -> ArrayLike:
        with np.errstate(over="ignore"):
            return np.cosh(self.kappa * np.asarray(r, dtype=np.float64))

    def d2w(self, r: ArrayLike) -> ArrayLike:
        with np.errstate(over="ignore"):
            return self.kappa * np.sinh(self.kappa * np.asarray(r, dtype=np.float64))

    def one_minus_dw2(self, r: ArrayLike) -> ArrayLike:
        with np.errstate(over="ignore"):
            return -np.sinh(self.kappa * np.asarray(r, dtype=np.float64)) ** 2

    @property
    def d3w0(self) -> float:
        return self.kappa**2

    def max_radius(self, n: int) -> float:
        return _LOG_OVERFLOW_GUARD / ((n - 1) * self.kappa)

    def params(self) -> dict[str, Any]:
        return {"kappa": self.kappa}


class SmoothedCone(WarpingProfile):
    """Cone of slope a with the apex rounded off over the length scale ε.

    w(r) = a·r + (1−a)·ε·(√π/2)·erf(r/ε), so w' falls from 1 to a with
    w'' <= 0 everywhere; the manifold has Ric >= 0 and the cone's volume ratio.
    """

    kind = ProfileKind.CONE

    def __init__(self, slope: float = 0.5, smoothing: float = 1.0):
        if not 0 < slope <= 1:
            raise BadParameters(f"cone slope must lie in (0, 1], got {slope}")
        if smoothing <= 0:
            raise BadParameters(f"cone smoothing must be positive, got {smoothing}")
        self.slope = float(slope)
        self.smoothing = float(smoothing)
        super().__init__(tail_exponent=1.0, tail_coefficient=self.slope)

    def _gauss(self, r: ArrayLike) -> np.ndarray:
        return np.exp(-((np.asarray(r, dtype=np.float64) / self.smoothing) ** 2))

    def w(self, r: ArrayLike) -> ArrayLike:
        a, eps = self.slope, self.smoothing
        r = np.asarray(r, dtype=np.float64)
        return a * r + (1 - a) * eps * (math.sqrt(math.pi) / 2) * erf(r / eps)

    def dw(self, r: ArrayLike) -> ArrayLike:
        return self.slope + (1 - self.slope) * self._gauss(r)

    def d2w(self, r: ArrayLike) -> ArrayLike:
        r = np.asarray(r, dtype=np.float64)
        return -(1 - self.slope) * (2 * r / self.smoothing**2) * self._gauss(r)

    def one_minus_dw2(self, r: ArrayLike) -> ArrayLike:
        r = np.asarray(r, dtype=np.float64)
        one_minus = -(1 - self.slope) * np.expm1(-((r / self.smoothing) ** 2))
        return one_minus * (2.0 - one_minus)

    @property
    def d3w0(self) -> float:
        return -2 * (1 - self.slope) / self.smoothing**2

    def params(self) -> dict[str, Any]:
        return {"slope": self.slope, "smoothing": self.smoothing}


class Perturbed(WarpingProfile):
    """A base profile plus a compactly concentrated bump A·r³·e^{−(r/σ)²}."""

    kind = ProfileKind.PERTURBED

    def __init__(self, base: WarpingProfile | None = None, amplitude: float = 0.1, width: float = 1.0):
        if width <= 0:
            raise BadParameters(f"bump width must be positive, got {width}")
        self.base = base or Euclidean()
        self.amplitude = float(amplitude)
        self.width = float(width)
        super().__init__(self.base.tail_exponent, self.base.tail_coefficient)

    def _bump(self, r: ArrayLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=np.float64)
        s2 = self.width**2
        e = np.exp(-(r**2) / s2)
        b = r**3 * e
        db = (3 * r**2 - 2 * r**4 / s2) * e
        d2b = (6 * r - 14 * r**3 / s2 + 4 * r**5 / s2**2) * e
        return b, db, d2b

    def w(self, r: ArrayLike) -> ArrayLike:
        return self.base.w(r) + self.amplitude * self._bump(r)[0]

    def dw(self, r: ArrayLike) -> ArrayLike:
        return self.base.dw(r) + self.amplitude * self._bump(r)[1]

    def d2w(self, r: ArrayLike) -> ArrayLike:
        return self.base.d2w(r) + self.amplitude * self._bump(r)[2]

    def one_minus_dw2(self, r: ArrayLike) -> ArrayLike:
        extra = self.amplitude * self._bump(r)[1]
        return self.base.one_minus_dw2(r) - 2 * self.base.dw(r) * extra - extra**2

    @property
    def d3w0(self) -> float | None:
        base = self.base.d3w0
        return None if base is None else base + 6 * self.amplitude

    def max_radius(self, n: int) -> float:
        return self.base.max_radius(n)

    def params(self) -> dict[str, Any]:
        return {"base": self.base.describe(), "amplitude": self.amplitude, "width": self.width}


class Scaled(WarpingProfile):
    """w_s(r) = s·w(r/s): the same manifold with every length multiplied by s."""

    kind = ProfileKind.SCALED

    def __init__(self, base: WarpingProfile, s: float):
        if s <= 0:
            raise BadParameters(f"scale factor must be positive, got {s}")
        self.base = base
        self.s = float(s)
        p, c = base.tail_exponent, base.tail_coefficient
        super().__init__(p, c if math.isinf(p) else c * self.s ** (1 - p))

    def w(self, r: ArrayLike) -> ArrayLike:
        return self.s * self.base.w(np.asarray(r, dtype=np.float64) / self.s)

    def dw(self, r: ArrayLike) -> ArrayLike:
        return self.base.dw(np.asarray(r, dtype=np.float64) / self.s)

    def d2w(self, r: ArrayLike) -> ArrayLike:
        return self.base.d2w(np.asarray(r, dtype=np.float64) / self.s) / self.s

    def one_minus_dw2(self, r: ArrayLike) -> ArrayLike:
        return self.base.one_minus_dw2(np.asarray(r, dtype=np.float64) / self.s)

    @property
    def d3w0(self) -> float | None:
        base = self.base.d3w0
        return None if base is None else base / self.s**2

    def max_radius(self, n: int) -> float:
        return self.s * self.base.max_radius(n)

    def params(self) -> dict[str, Any]:
        return {"base": self.base.describe(), "s": self.s}
