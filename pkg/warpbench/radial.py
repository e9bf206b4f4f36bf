"""Radial potential theory on model manifolds.

Everything here reduces to the radial inverse Laplacian

    𝒢[h](r) = ∫_r^∞ w(t)^{1−n} ∫_0^t h(s) w(s)^{n−1} ds dt,

the bounded solution of −Δφ = h that vanishes at infinity. Integrals run on
the log grid of the manifold; the part beyond R_max is closed with the local
power law of the outer integrand.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from warpbench import quadrature
from warpbench.errors import (
    BadParameters,
    Divergent,
    InequalityViolated,
    NoConvergence,
    NotGaugeable,
    OutOfGrid,
    Parabolic,
)
from warpbench.geometry import curvature_envelope, ric_minus, sphere_area, volume_field
from warpbench.models import GaugeFunction, GreenKernel, KatoReport, ModelManifold, RadialField

logger = logging.getLogger(__name__)

DIVERGENCE_EPS = 1e-3
GAUGE_TOL = 1e-10
GAUGE_MAX_ITER = 1000
GAUGE_RESIDUAL_RTOL = 1e-6
IDENTITY_RTOL = 1e-6


@dataclass(frozen=True)
class RadialSolution:
    """𝒢[h] on the grid together with the inner flux integral I(r) = ∫_0^r h w^{n−1}."""

    values: np.ndarray
    inner: np.ndarray
    tail: float
    pole_value: float


def _local_growth(M: ModelManifold) -> float:
    """R·w'(R)/w(R): the power-law exponent of w at the end of the grid."""
    return float(M.r_max * M.dw[-1] / M.w[-1])


def radial_inverse(M: ModelManifold, h: np.ndarray, label: str = "radial inverse") -> RadialSolution:
    """𝒢[h] at every grid node.

    Raises Divergent when the outer integrand I·w^{1−n} decays slower than
    r^{−1−ε} at R_max.
    """
    n, r, w = M.n, M.radii, M.w
    h = np.asarray(h, dtype=np.float64)
    s = np.log(r)
    wn = w ** (n - 1)

    inner = h[0] * wn[0] * r[0] / n + quadrature.cumulative_left(s, h * wn * r)
    outer = inner / wn

    if inner[-1] == 0:
        tail = 0.0
    else:
        # d log(I·w^{1−n}) / d log r at R_max
        sigma = r[-1] * h[-1] * wn[-1] / inner[-1] - (n - 1) * _local_growth(M)
        if not sigma < -1 - DIVERGENCE_EPS:
            raise Divergent(
                f"{label}: outer integrand decays like r^{sigma:.4g} at R_max={M.r_max:g}; "
                f"needs faster than r^-1"
            )
        tail = outer[-1] * r[-1] / (-sigma - 1)

    values = quadrature.cumulative_right(s, outer * r) + tail
    # Over [0, r_min] the integrand is h(0)·t/n to leading order.
    pole_value = float(values[0] + h[0] * r[0] ** 2 / (2 * n))
    return RadialSolution(values=values, inner=inner, tail=tail, pole_value=pole_value)


def _flux_laplacian(M: ModelManifold, flux: np.ndarray) -> np.ndarray:
    """Δφ = (w^{n−1}φ')'/w^{n−1} at the nodes, from the flux w^{n−1}φ'."""
    s = np.log(M.radii)
    return quadrature.node_derivative(s, flux) / (M.radii * M.w ** (M.n - 1))


# ── Green kernel ──────────────────────────────────────────────────


def _green_tail(M: ModelManifold, p_eff: float) -> float:
    n = M.n
    return M.r_max * M.w[-1] ** (1 - n) / ((n - 1) * p_eff - 1)


def green_pole(M: ModelManifold) -> GreenKernel:
    """G(r) = (1/ω_{n−1})∫_r^∞ w^{1−n}, normalised so that −ΔG = δ_o."""
    n, r, w = M.n, M.radii, M.w
    p = M.profile.tail_exponent
    if not (n - 1) * p > 1:
        raise Parabolic(
            f"{M.profile!r}: tail exponent p={p:g} gives p(n-1) <= 1, no positive Green kernel"
        )
    p_eff = _local_growth(M)
    if not (n - 1) * p_eff > 1 + DIVERGENCE_EPS:
        raise Parabolic(f"{M.profile!r}: w^(1-n) is not integrable past R_max (local p={p_eff:.4g})")

    omega = sphere_area(n - 1)
    s = np.log(r)
    integrand = w ** (1 - n)
    G = (quadrature.cumulative_right(s, integrand * r) + _green_tail(M, p_eff)) / omega
    dG = -integrand / omega

    # flux form of harmonicity: ω·w^{n−1}·G' ≡ −1
    dG_num = quadrature.node_derivative(s, G) / r
    residual = float(np.max(np.abs(omega * w ** (n - 1) * dG_num + 1.0)))
    if residual > IDENTITY_RTOL:
        logger.warning(f"Green kernel harmonicity residual {residual:.2e}")
    logger.info(f"Green kernel: G(r_min)={G[0]:.6g}, harmonicity residual {residual:.2e}")

    return GreenKernel(
        G=RadialField(r, G, "G"),
        dG=RadialField(r, dG, "dG"),
        nonparabolic=True,
        harmonicity_residual=residual,
    )


def li_yau_check(M: ModelManifold, kernel: GreenKernel | None = None) -> float:
    """sup_r G(r) / ∫_r^∞ t/V(t) dt, the empirical constant in the Li–Yau two-sided bound."""
    kernel = kernel or green_pole(M)
    r = M.radii
    V = volume_field(M).values
    # local volume growth exponent d log V / d log r at R_max
    m = float(r[-1] * sphere_area(M.n - 1) * M.w[-1] ** (M.n - 1) / V[-1])
    if not m > 2 + DIVERGENCE_EPS:
        raise Parabolic(f"t/V(t) is not integrable (volume growth exponent {m:.4g})")
    tail = r[-1] ** 2 / (V[-1] * (m - 2))
    integral = quadrature.cumulative_right(np.log(r), r**2 / V) + tail
    ratio = kernel.G.values / integral
    implied = float(np.max(ratio))
    logger.info(
        f"Li-Yau: implied constant {implied:.6g} (ratio range [{ratio.min():.6g}, {ratio.max():.6g}])"
    )
    return implied


# ── Kato constant and gauge ───────────────────────────────────────


def kato_constant(M: ModelManifold) -> KatoReport:
    """k∞ = sup_r 𝒢[Ric₋](r), the elliptic Kato constant of a radial Ric₋."""
    green_pole(M)
    rm = ric_minus(M)
    n, r = M.n, M.radii
    try:
        sol = radial_inverse(M, rm.values, label="Kato potential")
    except Divergent as e:
        raise Divergent(f"k_infty = inf: {e}") from e

    s = np.log(r)
    quadrature.verify_cumulative(s, rm.values * M.w ** (n - 1) * r, "Kato inner integral")
    quadrature.verify_cumulative(
        s, sol.inner * M.w ** (1 - n) * r, "Kato outer integral", from_right=True
    )

    i_max = int(np.argmax(sol.values))
    if sol.pole_value >= sol.values[i_max]:
        k_infty, argmax_radius = sol.pole_value, 0.0
    else:
        k_infty, argmax_radius = float(sol.values[i_max]), float(r[i_max])

    feasible = (n - 2) * k_infty < 1
    gamma = 1.0 / (1.0 - (n - 2) * k_infty) if feasible else math.inf
    logger.info(
        f"Kato constant: k_infty={k_infty:.10g} at r={argmax_radius:.4g}, "
        f"gauge {'feasible' if feasible else 'infeasible'}"
    )
    return KatoReport(
        k_infty=k_infty,
        u=RadialField(r, sol.values, "kato_potential"),
        argmax_radius=argmax_radius,
        gauge_feasible=feasible,
        gamma=gamma,
    )


def gauge_solve(M: ModelManifold, kato: KatoReport | None = None) -> GaugeFunction:
    """Fixed point of φ ↦ 1 + (n−2)·𝒢[Ric₋·φ].

    The map contracts with factor (n−2)k∞, so the iterates stay in [1, γ].
    """
    kato = kato or kato_constant(M)
    n, r, w = M.n, M.radii, M.w
    if not kato.gauge_feasible:
        raise NotGaugeable(f"(n-2)·k_infty = {(n - 2) * kato.k_infty:.6g} >= 1")

    rm = ric_minus(M).values
    phi = phi_prev = np.ones_like(r)
    for iteration in range(1, GAUGE_MAX_ITER + 1):
        sol = radial_inverse(M, rm * phi, label="gauge iterate")
        phi_next = 1.0 + (n - 2) * sol.values
        delta = float(np.max(np.abs(phi_next - phi)))
        logger.debug(f"Gauge iteration {iteration}: sup|Δφ| = {delta:.3e}")
        phi_prev, phi = phi, phi_next
        if delta < GAUGE_TOL:
            break
    else:
        raise NoConvergence(f"Gauge iteration did not settle in {GAUGE_MAX_ITER} steps")

    flux = -(n - 2) * sol.inner
    dphi = flux / w ** (n - 1)
    # flux = antiderivative spline of Ric₋·φ_prev·w^{n−1}; its node derivative is exact
    lap_phi = -(n - 2) * rm * phi_prev
    residual = float(np.max(np.abs(lap_phi + (n - 2) * rm * phi)))
    residual_bound = GAUGE_RESIDUAL_RTOL * float(rm.max()) * float(phi.max())

    if phi.min() < 1 - 1e-12 or phi.max() > kato.gamma * (1 + 1e-9):
        raise InequalityViolated(
            f"Gauge sandwich 1 <= φ <= γ={kato.gamma:.10g} fails: φ in [{phi.min():.10g}, {phi.max():.10g}]"
        )
    if residual > residual_bound:
        logger.warning(f"Gauge residual {residual:.2e} above 1e-6·sup Ric_-·sup φ = {residual_bound:.2e}")
    logger.info(
        f"Gauge converged in {iteration} iterations: sup φ={phi.max():.10g}, residual {residual:.2e}"
    )
    return GaugeFunction(
        phi=RadialField(r, phi, "phi"),
        f=RadialField(r, np.log(phi) / (n - 2), "f"),
        dphi=RadialField(r, dphi, "dphi"),
        lap_phi=RadialField(r, lap_phi, "lap_phi"),
        iterations=iteration,
        residual=residual,
        residual_bound=residual_bound,
    )


def conformal_bakry_emery_check(M: ModelManifold, g: GaugeFunction) -> float:
    """Smallest eigenvalue of Ric − Δf·g − (n−2)df⊗df over the grid, f = log φ/(n−2)."""
    n = M.n
    report = curvature_envelope(M)
    phi = g.phi.values
    df = g.dphi.values / ((n - 2) * phi)
    lap_f = g.lap_phi.values / ((n - 2) * phi) - (n - 2) * df**2

    radial = report.ric_radial.values - lap_f - (n - 2) * df**2
    tangential = report.ric_tangential.values - lap_f
    min_eig = float(np.min(np.minimum(radial, tangential)))
    logger.info(f"Conformal Bakry-Emery tensor: min eigenvalue {min_eig:.3e}")
    return min_eig


# ── Poisson and energy ────────────────────────────────────────────


def poisson_bounded(M: ModelManifold, h: RadialField) -> tuple[RadialField, float]:
    """Bounded solution φ_h = 𝒢[h] of −Δφ = h and its sup norm."""
    green_pole(M)
    r = M.radii
    hv = np.asarray(h(r), dtype=np.float64)
    if np.any(hv < 0):
        raise BadParameters("Poisson data h must be non-negative")
    if not np.any(hv > 0):
        return RadialField(r, np.zeros_like(r), "phi_h"), 0.0

    sol = radial_inverse(M, hv, label="Poisson solution")
    lap = _flux_laplacian(M, -sol.inner)
    residual = float(np.max(np.abs(lap + hv))) / float(hv.max())
    if residual > IDENTITY_RTOL:
        logger.warning(f"Poisson residual {residual:.2e} relative to sup h (non-smooth data?)")
    sup_norm = max(sol.pole_value, float(sol.values.max()))
    logger.info(f"Poisson solution bounded: sup φ_h = {sup_norm:.10g}")
    return RadialField(r, sol.values, "phi_h"), sup_norm


def energy_identity_check(M: ModelManifold, r: float, kernel: GreenKernel | None = None) -> tuple[float, float]:
    """(∫_{M∖B_r} |∇G|², 4·G(r)); on a model manifold the energy equals G(r) exactly."""
    if not 0 < r <= M.r_max:
        raise OutOfGrid(f"r={r:g} outside (0, {M.r_max:g}]")
    kernel = kernel or green_pole(M)
    n, prof = M.n, M.profile
    omega = sphere_area(n - 1)

    def density(t: float) -> float:
        wt = float(prof.w(t))
        return (wt ** (1 - n) / omega) ** 2 * omega * wt ** (n - 1)

    energy = quadrature.integrate(density, r, M.r_max) + _green_tail(M, _local_growth(M)) / omega
    G_r = float(kernel.G(r))
    bound = 4.0 * G_r
    if energy > bound:
        raise InequalityViolated(f"Energy {energy:.6g} exceeds 4·G(r) = {bound:.6g} at r={r:g}")
    if abs(energy / G_r - 1.0) > IDENTITY_RTOL:
        raise InequalityViolated(
            f"Energy identity fails at r={r:g}: energy/G(r) = {energy / G_r:.10g}"
        )
    return energy, bound
