"""Model manifolds: construction, Ricci curvature, volumes and curvature envelopes."""

from __future__ import annotations

import logging
import math
from dataclasses import replace

import numpy as np
from scipy.special import gamma

from warpbench import quadrature
from warpbench.errors import (
    BadParameters,
    DimensionTooLow,
    EnvelopeDivergent,
    FitFailed,
    NonPositiveWarp,
    OutOfGrid,
    PoleConditionViolated,
    PoleEvaluation,
    TailUnresolved,
)
from warpbench.models import CurvatureReport, GridSpec, ModelManifold, RadialField
from warpbench.profiles.base import WarpingProfile

logger = logging.getLogger(__name__)

POLE_TOL_W = 1e-8
POLE_TOL_DW = 1e-3
TAIL_TOL = 0.05
ALPHA_STEP = 0.25
DIVERGENCE_EPS = 1e-3


def sphere_area(k: int) -> float:
    """Area of the unit k-sphere in R^{k+1}."""
    return 2 * math.pi ** ((k + 1) / 2) / gamma((k + 1) / 2)


# ── Construction ──────────────────────────────────────────────────


def build_manifold(n: int, profile: WarpingProfile, grid: GridSpec | None = None) -> ModelManifold:
    """Validate the pole conditions and positivity of w and return the manifold."""
    if n < 3:
        raise DimensionTooLow(f"Model manifolds need n >= 3, got n={n}")
    grid = grid or GridSpec()
    if not (0 < grid.r_min < grid.r_max) or grid.count < 16:
        raise BadParameters(f"Invalid radial grid {grid}")

    cap = profile.max_radius(n)
    if grid.r_max > cap:
        logger.warning(
            f"{profile!r}: w^{n - 1} overflows beyond r={cap:.4g}; truncating R_max from {grid.r_max:g}"
        )
        grid = replace(grid, r_max=cap)
    if grid.r_max < 1e2:
        logger.warning(f"R_max={grid.r_max:.4g} is below 100; tail-dominated quantities lose accuracy")

    w0 = float(profile.w(0.0))
    dw0 = float(profile.dw(0.0))
    if abs(w0) > POLE_TOL_W:
        raise PoleConditionViolated(f"w(0) = {w0:g}, the pole needs w(0) = 0")
    if abs(dw0 - 1.0) > POLE_TOL_DW:
        raise PoleConditionViolated(f"w'(0) = {dw0:g}, the pole needs w'(0) = 1")
    d2w0 = float(profile.d2w(0.0))
    if abs(d2w0) > POLE_TOL_DW:
        logger.warning(f"w''(0) = {d2w0:g}; curvature near the pole will be unreliable")

    M = ModelManifold(n=n, profile=profile, grid=grid)
    bad = ~(M.w > 0)
    if np.any(bad):
        r_bad = float(M.radii[np.argmax(bad)])
        raise NonPositiveWarp(f"w(r) <= 0 at r={r_bad:g}")

    logger.info(
        f"Manifold built: n={n}, {profile!r}, grid [{grid.r_min:g}, {grid.r_max:g}] x {grid.count}"
    )
    return M


# ── Curvature ─────────────────────────────────────────────────────


def ricci_eigenvalues(M: ModelManifold, r):
    """(radial, tangential) Ricci eigenvalues on unit vectors at radius r.

    At r = 0 both equal −(n−1)·w'''(0), the limit of the warped-product formulas.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if np.any(r_arr < 0):
        raise BadParameters("Radii must be non-negative")
    if np.any(r_arr > M.r_max * (1 + 1e-12)):
        raise OutOfGrid(f"Radius beyond R_max={M.r_max:g}")

    n, prof = M.n, M.profile
    with np.errstate(divide="ignore", invalid="ignore"):
        w = prof.w(r_arr)
        ratio = prof.d2w(r_arr) / w
        radial = -(n - 1) * ratio
        tangential = -ratio + (n - 2) * prof.one_minus_dw2(r_arr) / w**2

    pole = r_arr == 0
    if np.any(pole):
        d3 = prof.d3w0
        if d3 is None:
            raise PoleEvaluation(f"{prof!r} has no pole expansion; evaluate at r > 0")
        radial[pole] = tangential[pole] = -(n - 1) * d3

    if np.ndim(r) == 0:
        return float(radial[0]), float(tangential[0])
    return radial, tangential


def _grid_eigenvalues(M: ModelManifold) -> tuple[np.ndarray, np.ndarray]:
    return ricci_eigenvalues(M, M.radii)


def ric_minus(M: ModelManifold) -> RadialField:
    radial, tangential = _grid_eigenvalues(M)
    values = np.maximum(0.0, -np.minimum(radial, tangential))
    return RadialField(M.radii, values, "ric_minus")


def ric_minus_at_pole(M: ModelManifold) -> float | None:
    d3 = M.profile.d3w0
    return None if d3 is None else max(0.0, (M.n - 1) * d3)


# ── Volumes ───────────────────────────────────────────────────────


def volume_and_area(M: ModelManifold, r: float) -> tuple[float, float]:
    """Volume and boundary area of the pole-centred ball B_r(o)."""
    if not 0 < r <= M.r_max * (1 + 1e-12):
        raise OutOfGrid(f"r={r:g} outside (0, {M.r_max:g}]")
    n, prof = M.n, M.profile
    omega = sphere_area(n - 1)
    V = omega * quadrature.integrate(lambda t: float(prof.w(t)) ** (n - 1), 0.0, r)
    A = omega * float(prof.w(r)) ** (n - 1)
    return V, A


def volume_field(M: ModelManifold) -> RadialField:
    """V(r) on the grid: spline quadrature plus the pole-side head r_min·w(r_min)^{n-1}/n."""
    n = M.n
    r, w = M.radii, M.w
    s = np.log(r)
    head = w[0] ** (n - 1) * r[0] / n
    inner = head + quadrature.cumulative_left(s, w ** (n - 1) * r)
    return RadialField(r, sphere_area(n - 1) * inner, "volume")


def asymptotic_volume_ratio(M: ModelManifold) -> float:
    """lim V(r)/r^n from the tail metadata: +inf for p > 1, 0 for p < 1."""
    n, prof = M.n, M.profile
    p, c = prof.tail_exponent, prof.tail_coefficient
    if math.isinf(p):
        logger.warning(f"{prof!r}: exponential volume growth, asymptotic volume ratio divergent")
        return math.inf

    R = M.r_max
    residual = abs(float(prof.w(R)) / (c * R**p) - 1.0)
    if residual >= TAIL_TOL:
        raise TailUnresolved(
            f"Tail w ~ {c:g}·r^{p:g} misses w(R_max) by {residual:.2%} (tolerance {TAIL_TOL:.0%})"
        )
    if p > 1 + 1e-6:
        logger.warning(f"Tail exponent p={p:g} > 1: asymptotic volume ratio divergent")
        return math.inf
    if p < 1 - 1e-6:
        logger.warning(f"Tail exponent p={p:g} < 1: asymptotic volume ratio is zero")
        return 0.0
    return sphere_area(n - 1) * c ** (n - 1) / n


# ── Envelope ──────────────────────────────────────────────────────


def _fit_decay(r: np.ndarray, q: np.ndarray, n: int) -> tuple[float, float]:
    """Minimal K over α ∈ [2, 6n] with q <= K/(1+r^α); ties go to the larger α."""
    alphas = np.arange(2.0, 6.0 * n + ALPHA_STEP / 2, ALPHA_STEP)
    positive = q > 0
    if not np.any(positive):
        return 0.0, float(alphas[-1])
    rq, qq = r[positive], q[positive]
    Ks = np.empty_like(alphas)
    with np.errstate(over="ignore"):
        for i, alpha in enumerate(alphas):
            Ks[i] = np.max(qq * (1.0 + rq**alpha))
    finite = np.isfinite(Ks)
    if not np.any(finite):
        raise FitFailed("Every α in the search grid overflows the decay fit")
    K = float(np.min(Ks[finite]))
    best = np.flatnonzero(finite & (Ks <= K * (1 + 1e-12)))
    return K, float(alphas[best[-1]])


def curvature_envelope(M: ModelManifold) -> CurvatureReport:
    """Eigenvalue fields, Ric₋, the minimal non-increasing envelope λ and the (K, α, b₀) fit."""
    n, r = M.n, M.radii
    radial, tangential = _grid_eigenvalues(M)
    rm = np.maximum(0.0, -np.minimum(radial, tangential))
    q = rm / (n - 1)

    lam = np.maximum.accumulate(q[::-1])[::-1]
    pole_value = ric_minus_at_pole(M)
    lambda0 = max(float(lam[0]), (pole_value or 0.0) / (n - 1))

    K, alpha = _fit_decay(r, q, n)

    head = lambda0 * r[0] ** 2 / 2
    body = quadrature.cumulative_left(np.log(r), lam * r**2)[-1]
    if lam[-1] == 0:
        tail = 0.0
    else:
        decay = -quadrature.tail_slope(r, lam)
        if not decay > 2 + DIVERGENCE_EPS:
            tail = math.inf
        else:
            tail = lam[-1] * r[-1] ** 2 / (decay - 2)
    b0 = head + body + tail
    if math.isinf(b0):
        logger.warning(f"{M.profile!r}: curvature budget b0 diverges (λ(R_max)={lam[-1]:.3g})")
    logger.info(f"Envelope: K={K:.6g}, alpha={alpha:g}, b0={b0:.6g}, lambda(0)={lambda0:.6g}")

    return CurvatureReport(
        ric_radial=RadialField(r, radial, "ric_radial"),
        ric_tangential=RadialField(r, tangential, "ric_tangential"),
        ric_minus=RadialField(r, rm, "ric_minus"),
        lam=RadialField(r, lam, "lambda"),
        K=K,
        alpha=alpha,
        b0=float(b0),
        lambda0=lambda0,
    )


def bishop_gromov_check(
    M: ModelManifold, r: float, R: float, report: CurvatureReport | None = None
) -> float:
    """V(R)/V(r) − e^{(n−1)b₀}(R/r)^n; non-positive on pole-centred balls."""
    if not 0 < r <= R:
        raise BadParameters(f"Need 0 < r <= R, got r={r:g}, R={R:g}")
    report = report or curvature_envelope(M)
    if not report.b0_finite:
        raise EnvelopeDivergent("Bishop-Gromov comparison needs a finite curvature budget b0")
    V_r, _ = volume_and_area(M, r)
    V_R, _ = volume_and_area(M, R)
    bound = math.exp((M.n - 1) * report.b0) * (R / r) ** M.n
    residual = V_R / V_r - bound
    logger.debug(f"Bishop-Gromov r={r:g}, R={R:g}: ratio={V_R / V_r:.10g}, bound={bound:.10g}")
    return residual
