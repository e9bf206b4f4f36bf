"""Warping profiles given by samples (r_i, w_i)."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline

from warpbench.errors import BadParameters, FitFailed
from warpbench.models import ProfileKind
from warpbench.profiles.base import ArrayLike, WarpingProfile

logger = logging.getLogger(__name__)


def fit_power_tail(r: np.ndarray, w: np.ndarray, decades: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of w ~ c·r^p over the last `decades` of the samples."""
    mask = (r >= r[-1] / 10**decades) & (r > 0) & (w > 0)
    if mask.sum() < 4:
        raise FitFailed(f"Only {int(mask.sum())} samples in the tail decade; need 4")
    p, log_c = np.polyfit(np.log(r[mask]), np.log(w[mask]), 1)
    return float(p), float(np.exp(log_c))


class Tabulated(WarpingProfile):
    """Not-a-knot cubic spline through the samples, continued by the power-law tail.

    w'' comes from the interpolant. No pole expansion is available, so
    curvature requests at r = 0 raise PoleEvaluation.
    """

    kind = ProfileKind.TABULATED

    def __init__(
        self,
        r: np.ndarray,
        w: np.ndarray,
        tail_exponent: float | None = None,
        tail_coefficient: float | None = None,
        source: str = "",
    ):
        r = np.asarray(r, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        if r.ndim != 1 or r.shape != w.shape or len(r) < 8:
            raise BadParameters("Tabulated profile needs at least 8 matching (r, w) samples")
        if np.any(np.diff(r) <= 0):
            raise BadParameters("Tabulated radii must be strictly increasing")
        self.samples_r = r
        self.samples_w = w
        self.source = source
        self._spline = CubicSpline(r, w, bc_type="not-a-knot")
        if tail_exponent is None or tail_coefficient is None:
            p, c = fit_power_tail(r, w)
            logger.info(f"Tabulated tail fitted: w ~ {c:.6g}·r^{p:.6g}")
            tail_exponent = p if tail_exponent is None else tail_exponent
            tail_coefficient = c if tail_coefficient is None else tail_coefficient
        super().__init__(tail_exponent, tail_coefficient)

    @classmethod
    def from_csv(cls, path: str | Path, **tail: float | None) -> Tabulated:
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    continue  # header line
        data = np.array(rows, dtype=np.float64)
        if data.size == 0:
            raise BadParameters(f"No (r, w) samples found in {path}")
        return cls(data[:, 0], data[:, 1], source=str(path), **tail)

    # Past the last sample w follows c'·r^p through (r_last, w_last).
    def _tail_parts(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r_last = self.samples_r[-1]
        inside = r <= r_last
        return inside, r / r_last

    def _eval(self, r_in: ArrayLike, order: int) -> ArrayLike:
        r = np.atleast_1d(np.asarray(r_in, dtype=np.float64))
        inside, ratio = self._tail_parts(r)
        out = np.empty_like(r)
        out[inside] = self._spline(r[inside], order)
        if np.any(~inside):
            p = self.tail_exponent
            w_last = self.samples_w[-1]
            x = ratio[~inside]
            r_out = r[~inside]
            if order == 0:
                out[~inside] = w_last * x**p
            elif order == 1:
                out[~inside] = p * w_last * x**p / r_out
            else:
                out[~inside] = p * (p - 1) * w_last * x**p / r_out**2
        return out if np.ndim(r_in) else float(out[0])

    def w(self, r: ArrayLike) -> ArrayLike:
        return self._eval(r, 0)

    def dw(self, r: ArrayLike) -> ArrayLike:
        return self._eval(r, 1)

    def d2w(self, r: ArrayLike) -> ArrayLike:
        return self._eval(r, 2)

    def params(self) -> dict[str, Any]:
        digest = float(np.sum(self.samples_w * np.arange(1, len(self.samples_w) + 1)))
        return {"samples": len(self.samples_r), "source": self.source, "checksum": digest}
