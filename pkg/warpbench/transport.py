"""ABP transport on geodesic balls B_R(o) with radial weight f and radial test function h.

The Neumann problem e^f div(e^{-f} h ∇u) = n h^{n/(n-1)} - |∇h|, ∂_ν u = 1
reduces to a single integral for u'. Transport rays from a point x̄ stay on
the line through the pole, so the Jacobian of Φ_t splits into the radial
factor 1 + u''(x̄)t and n-1 copies of a transverse Jacobi field.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from warpbench import quadrature
from warpbench.errors import (
    AVRUndefined,
    BadParameters,
    CurvatureHypothesisFails,
    DegenerateH,
    HorizonTooSmall,
    InequalityViolated,
    NoConvergence,
    NotGaugeable,
    NotNormalized,
    OutsideU,
)
from warpbench.geometry import asymptotic_volume_ratio, ricci_eigenvalues, sphere_area, volume_and_area
from warpbench.models import (
    JacobianSample,
    ModelManifold,
    RadialField,
    TransportResult,
    WeightedBallProblem,
)
from warpbench.radial import kato_constant

logger = logging.getLogger(__name__)

BALL_POINTS = 2049
JACOBIAN_STARTS = 32
JACOBIAN_STEPS = 512
NEUMANN_TOL = 1e-8
BOUND_RTOL = 1e-9
RICCATI_TOL = 1e-6
RIC_F_TOL = 1e-8
A_R_PROBES = 257


# ── Weights ───────────────────────────────────────────────────────


def constant_weight(M: ModelManifold, value: float = 0.0) -> RadialField:
    return RadialField.constant(M.radii, value, "f")


def bump_weight(M: ModelManifold, amplitude: float = 0.1, width: float = 0.5) -> RadialField:
    """f(r) = −A·e^{−(r/σ)²}: bounded, non-decreasing for A > 0, converging to 0."""
    if width <= 0:
        raise BadParameters(f"weight width must be positive, got {width}")
    s2 = width**2

    def gauss(r):
        return np.exp(-(np.asarray(r, dtype=np.float64) ** 2) / s2)

    # closed-form derivatives: spline ones lose all precision at the pole
    return RadialField.from_function(
        M.radii,
        lambda r: -amplitude * gauss(r),
        "f",
        derivatives=(
            lambda r: 2 * amplitude * r / s2 * gauss(r),
            lambda r: 2 * amplitude / s2 * (1 - 2 * r**2 / s2) * gauss(r),
        ),
    )


def ricci_f_eigenvalues(M: ModelManifold, f: RadialField) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of Ric + Hess f on the grid: (ric_radial + f'', ric_tangential + f'w'/w)."""
    r = M.radii
    radial, tangential = ricci_eigenvalues(M, r)
    return radial + f.derivative(r, 2), tangential + f.derivative(r, 1) * M.dw / M.w


def weighted_avr(M: ModelManifold, f: RadialField) -> float:
    """β_f = lim vol_f(B_r)/r^n = e^{−f(∞)}·β; needs f to settle at infinity."""
    beta = asymptotic_volume_ratio(M)
    if not 0 < beta < math.inf:
        raise AVRUndefined(f"Asymptotic volume ratio β={beta:g} is not in (0, ∞)")
    r = M.radii
    tail = f.values[r >= M.r_max / 10]
    f_inf = float(f.values[-1])
    if float(np.ptp(tail)) > 1e-6 * max(1.0, abs(f_inf)):
        raise AVRUndefined(f"Weight has not converged by R_max (spread {np.ptp(tail):.3g} over the last decade)")
    return math.exp(-f_inf) * beta


# ── Radial integrals over the ball ────────────────────────────────


@dataclass(frozen=True)
class _BallIntegrals:
    gradient: float  # ∫_Ω |∇h| e^{−f}
    boundary: float  # ∫_{∂Ω} h e^{−f}
    bulk: float  # ∫_Ω h^{n/(n−1)} e^{−f}


def _ball_integrals(P: WeightedBallProblem) -> _BallIntegrals:
    M, R = P.M, P.R
    n, prof = M.n, M.profile
    omega = sphere_area(n - 1)
    q = n / (n - 1)

    def measure(t: float) -> float:
        return math.exp(-float(P.f(t))) * float(prof.w(t)) ** (n - 1)

    gradient = quadrature.integrate(lambda t: abs(float(P.h.derivative(t))) * measure(t), 0.0, R)
    bulk = quadrature.integrate(lambda t: float(P.h(t)) ** q * measure(t), 0.0, R)
    boundary = float(P.h(R)) * measure(R)
    return _BallIntegrals(omega * gradient, omega * boundary, omega * bulk)


def normalize_scaling(P: WeightedBallProblem) -> WeightedBallProblem:
    """Rescale h so that ∫|∇h|e^{−f} + ∫_{∂Ω} h e^{−f} = n∫h^{n/(n−1)}e^{−f}."""
    samples = np.asarray(P.h(np.linspace(0.0, P.R, 257)))
    if np.any(samples <= 0):
        raise DegenerateH("Test function h must be positive on the ball")
    parts = _ball_integrals(P)
    lhs = parts.gradient + parts.boundary
    if lhs <= 0 or parts.bulk <= 0:
        raise DegenerateH("Both sides of the scaling identity vanish")
    n = P.M.n
    c = (lhs / (n * parts.bulk)) ** (n - 1)
    logger.debug(f"Scaling constant c={c:.15g} for R={P.R:g}")
    return P.with_h(P.h.scaled(c), normalized=True)


# ── Neumann problem ───────────────────────────────────────────────


def _intervals(r: np.ndarray, mask: np.ndarray) -> list[tuple[float, float]]:
    out = []
    i, N = 0, len(r)
    while i < N:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < N and mask[j + 1]:
            j += 1
        out.append((float(r[i]), float(r[min(j + 1, N - 1)])))
        i = j + 1
    return out


def _a_r_mask(r: np.ndarray, u: np.ndarray, du: np.ndarray, in_u: np.ndarray, horizon: float) -> np.ndarray:
    """Sampled A_r membership: r·u(y) + ½d(y, Φ_r(x))² >= r·u(x) + ½r²u'(x)² for y in U.

    Probe points y lie on the line through the pole on both sides, where the
    distance to the image point is |y − ρ| or y + ρ.
    """
    idx_y = np.flatnonzero(in_u)
    if len(idx_y) > A_R_PROBES:
        idx_y = idx_y[np.linspace(0, len(idx_y) - 1, A_R_PROBES).astype(int)]
    y, uy = r[idx_y], u[idx_y]

    x = r[in_u]
    rho = x + horizon * du[in_u]
    target = horizon * u[in_u] + 0.5 * (horizon * du[in_u]) ** 2
    same = horizon * uy[None, :] + 0.5 * (y[None, :] - rho[:, None]) ** 2
    opposite = horizon * uy[None, :] + 0.5 * (y[None, :] + rho[:, None]) ** 2
    best = np.minimum(same.min(axis=1), opposite.min(axis=1))
    ok = best >= target - 1e-10 * (1.0 + np.abs(target))

    mask = np.zeros_like(in_u)
    mask[np.flatnonzero(in_u)] = ok
    return mask


def _a_r(
    r: np.ndarray,
    u: np.ndarray,
    du: np.ndarray,
    d2u: np.ndarray,
    in_u: np.ndarray,
    horizon: float,
) -> tuple[list[tuple[float, float]], bool]:
    """A_r = U when u is convex on U, otherwise the sampled membership test."""
    if np.all(d2u[in_u] >= 0):
        return _intervals(r, in_u), False
    mask = _a_r_mask(r, u, du, in_u, horizon)
    logger.warning(f"u is not convex on U; A_r sampled for horizon {horizon:g} ({int(mask.sum())} nodes)")
    return _intervals(r, mask), True


def solve_neumann_radial(P: WeightedBallProblem) -> TransportResult:
    """u' = ∫_0^r e^{−f}·RHS·w^{n−1} / (e^{−f}·h·w^{n−1}), u(0) = 0."""
    if not P.normalized:
        raise NotNormalized("Call normalize_scaling before solving the Neumann problem")
    M, R = P.M, P.R
    n, prof = M.n, M.profile

    r = np.linspace(0.0, R, BALL_POINTS)
    w, dw = prof.w(r), prof.dw(r)
    f, df = np.asarray(P.f(r)), np.asarray(P.f.derivative(r))
    h, dh = np.asarray(P.h(r)), np.asarray(P.h.derivative(r))

    rhs = n * h ** (n / (n - 1)) - np.abs(dh)
    measure = np.exp(-f) * w ** (n - 1)
    inner = quadrature.cumulative_left(r, measure * rhs)

    du = np.zeros_like(r)
    du[1:] = inner[1:] / (measure[1:] * h[1:])
    u = quadrature.cumulative_left(r, du)

    d2u = np.empty_like(r)
    d2u[0] = rhs[0] / (n * h[0])
    d2u[1:] = rhs[1:] / h[1:] - du[1:] * (dh[1:] / h[1:] - df[1:] + (n - 1) * dw[1:] / w[1:])
    lap_f_u = (rhs - du * dh) / h

    drift = abs(du[-1] - 1.0)
    if drift > NEUMANN_TOL:
        logger.warning(f"Neumann condition off by {drift:.2e} at R={R:g}")

    in_u = np.abs(du) < 1.0
    u_set = _intervals(r, in_u)
    a_r_set, sampled = _a_r(r, u, du, d2u, in_u, 4 * R)
    logger.info(f"Neumann solve R={R:g}: u'(R)={du[-1]:.12g}, U={u_set}")

    def field(values, name):
        return RadialField(r, values, name, log_scale=False)

    return TransportResult(
        problem=P,
        u=field(u, "u"),
        du=field(du, "du"),
        d2u=field(d2u, "d2u"),
        lap_f_u=field(lap_f_u, "lap_f_u"),
        u_set=u_set,
        a_r_set=a_r_set,
        a_r_sampled=sampled,
    )


# ── Jacobians along transport rays ────────────────────────────────


@dataclass(frozen=True)
class _Ray:
    t: np.ndarray
    rho: np.ndarray
    speed: float
    d2u: float
    j: np.ndarray
    dj: np.ndarray
    det_p: np.ndarray
    bound: np.ndarray
    holds: np.ndarray


def _trace_ray(P: WeightedBallProblem, T: TransportResult, x_bar: float, horizon: float, steps: int) -> _Ray:
    if not T.in_u(x_bar):
        raise OutsideU(f"x̄={x_bar:g} is not in U={T.u_set}")
    M = P.M
    n, prof = M.n, M.profile
    v = float(T.du(x_bar))
    d2u = float(T.d2u(x_bar))
    lap = float(T.lap_f_u(x_bar))
    F0 = float(P.f(x_bar))

    if x_bar == 0:
        dj0 = d2u
    else:
        dj0 = v * float(prof.dw(x_bar)) / float(prof.w(x_bar))

    def rhs(t, y):
        rho = abs(x_bar + v * t)
        curv = 0.0 if v == 0 or rho == 0 else v * v * float(prof.d2w(rho)) / float(prof.w(rho))
        weight = math.exp(-(2.0 / n) * (float(P.f(rho)) - F0))
        return [y[1], curv * y[0], weight]

    t_eval = np.linspace(0.0, horizon, steps + 1)
    sol = solve_ivp(
        rhs, (0.0, horizon), [1.0, dj0, 0.0], method="DOP853", t_eval=t_eval, rtol=1e-11, atol=1e-13
    )
    if not sol.success:
        raise NoConvergence(f"Jacobi integration from x̄={x_bar:g} failed: {sol.message}")

    t = sol.t
    j, dj, E = sol.y
    rho = np.abs(x_bar + v * t)
    det_p = (1.0 + d2u * t) * j ** (n - 1)
    F = np.asarray(P.f(rho))
    bound = np.exp(F - F0) * (1.0 + lap / n * E) ** n

    if v == 0:
        holds = np.ones_like(t, dtype=bool)
    else:
        ric_rad = np.empty_like(rho)
        pos = rho > 0
        ric_rad[pos] = ricci_eigenvalues(M, rho[pos])[0]
        if not np.all(pos):
            ric_rad[~pos] = ricci_eigenvalues(M, 0.0)[0]
        ric_f = ric_rad + np.asarray(P.f.derivative(rho, 2))
        holds = np.logical_and.accumulate(ric_f >= -1e-10)
    return _Ray(t, rho, v, d2u, j, dj, det_p, bound, holds)


def _conjugate_index(ray: _Ray) -> int | None:
    bad = np.flatnonzero((ray.det_p <= 0) | (ray.j <= 0))
    return int(bad[0]) if len(bad) else None


def _until_conjugate(ray: _Ray) -> int:
    index = _conjugate_index(ray)
    return len(ray.t) if index is None else index


def _jacobian_samples(ray: _Ray, x_bar: float) -> list[JacobianSample]:
    stop = _until_conjugate(ray)
    if stop < len(ray.t):
        logger.warning(f"Conjugate point on the ray from x̄={x_bar:g} at t={ray.t[stop]:.4g}")
    samples = [
        JacobianSample(
            x_bar=x_bar,
            t=float(ray.t[i]),
            det_p=float(ray.det_p[i]),
            bound=float(ray.bound[i]),
            hypothesis_holds=bool(ray.holds[i]),
        )
        for i in range(stop)
    ]
    for s in samples:
        if s.hypothesis_holds and s.det_p > s.bound * (1 + BOUND_RTOL):
            raise InequalityViolated(
                f"Jacobian bound fails at x̄={x_bar:g}, t={s.t:g}: det P={s.det_p:.12g} > {s.bound:.12g}"
            )
    return samples


def _riccati(P: WeightedBallProblem, ray: _Ray, x_bar: float) -> float:
    stop = _until_conjugate(ray)
    n, prof = P.M.n, P.M.profile

    t, rho = ray.t[:stop], ray.rho[:stop]
    j, dj = ray.j[:stop], ray.dj[:stop]
    a = ray.d2u
    v2 = ray.speed**2
    radial = 1.0 + a * t

    curv = np.zeros_like(t)
    if v2 > 0:
        pos = rho > 0
        curv[pos] = prof.d2w(rho[pos]) / prof.w(rho[pos])
    tr_q = a / radial + (n - 1) * dj / j
    d_tr_q = -((a / radial) ** 2) + (n - 1) * (v2 * curv - (dj / j) ** 2)
    d2F = np.asarray(P.f.derivative(rho, 2)) * v2
    residual = (d_tr_q - d2F + tr_q**2 / n) / (1.0 + tr_q**2)

    holds = ray.holds[:stop]
    if np.any(holds) and float(residual[holds].max()) > RICCATI_TOL:
        raise InequalityViolated(
            f"Riccati inequality fails from x̄={x_bar:g}: residual {residual[holds].max():.3e}"
        )
    return float(residual.max())


def transport_jacobian(
    P: WeightedBallProblem,
    T: TransportResult,
    x_bar: float,
    horizon: float,
    steps: int = JACOBIAN_STEPS,
) -> list[JacobianSample]:
    """det DΦ_t(x̄) against the weighted Jacobian bound, for t in [0, horizon].

    The bound is asserted where Ric_f(γ̇,γ̇) >= 0 has held along the ray so far.
    Sampling stops at the first conjugate point.
    """
    return _jacobian_samples(_trace_ray(P, T, x_bar, horizon, steps), x_bar)


def riccati_residual(
    P: WeightedBallProblem,
    T: TransportResult,
    x_bar: float,
    horizon: float | None = None,
    steps: int = JACOBIAN_STEPS,
) -> float:
    """max_t [d/dt(trQ − F') + (trQ)²/n] / (1 + (trQ)²) along the ray from x̄."""
    horizon = 4 * P.R if horizon is None else horizon
    return _riccati(P, _trace_ray(P, T, x_bar, horizon, steps), x_bar)


def _start_radii(u_set: list[tuple[float, float]], count: int) -> list[float]:
    lengths = np.array([b - a for a, b in u_set])
    total = float(lengths.sum())
    edges = np.concatenate([[0.0], np.cumsum(lengths)])
    out = []
    for k in range(count):
        pos = (k + 0.5) / count * total
        i = min(int(np.searchsorted(edges, pos, side="right")) - 1, len(u_set) - 1)
        out.append(u_set[i][0] + (pos - edges[i]))
    return out


def sample_jacobians(
    P: WeightedBallProblem,
    T: TransportResult,
    count: int = JACOBIAN_STARTS,
    steps: int = JACOBIAN_STEPS,
    horizon: float | None = None,
) -> TransportResult:
    """Jacobian samples and Riccati residuals from `count` start radii spread over U."""
    if not T.u_set:
        raise OutsideU("U is empty; no transport rays to sample")
    horizon = 4 * P.R if horizon is None else horizon
    samples: list[JacobianSample] = []
    residuals: list[float] = []
    conjugate: list[tuple[float, float]] = []
    for x_bar in _start_radii(T.u_set, count):
        ray = _trace_ray(P, T, x_bar, horizon, steps)
        samples.extend(_jacobian_samples(ray, x_bar))
        residuals.append(_riccati(P, ray, x_bar))
        index = _conjugate_index(ray)
        if index is not None:
            conjugate.append((x_bar, float(ray.t[index])))
    checked = sum(s.hypothesis_holds for s in samples)
    logger.info(f"Jacobians: {len(samples)} samples from {count} rays, {checked} under Ric_f >= 0")
    return replace(
        T, jacobian_samples=samples, riccati_residuals=residuals, conjugate_points=conjugate
    )


# ── Surjectivity and the final inequalities ───────────────────────


def surjectivity_check(P: WeightedBallProblem, T: TransportResult, horizon: float) -> float:
    """sup over A_r ∩ U of |x̄ + r·u'(x̄)| minus (r − 2R); Φ_r(A_r) covers B_{r−2R}(o) when >= 0."""
    R = P.R
    if horizon <= 2 * R:
        raise HorizonTooSmall(f"Horizon r={horizon:g} must exceed diam Ω = {2 * R:g}")
    r = T.u.r
    u, du, d2u = T.u.values, T.du.values, T.d2u.values
    in_u = np.array([T.in_u(x) for x in r])
    a_r_set, _ = _a_r(r, u, du, d2u, in_u, horizon)

    candidates = [x for a, b in a_r_set for x in (a, b)]
    candidates.extend(x for x in r if any(a <= x <= b for a, b in a_r_set))
    if not candidates:
        raise InequalityViolated(f"A_r is empty for horizon {horizon:g}")
    reach = max(abs(x + horizon * float(T.du(x))) for x in candidates)
    margin = reach - (horizon - 2 * R)
    if margin < 0:
        raise InequalityViolated(f"Φ_r(A_r) misses B_(r-2R)(o): margin {margin:.6g}")
    logger.info(f"Surjectivity at r={horizon:g}: reach {reach:.8g}, margin {margin:.8g}")
    return margin


def weighted_sobolev_check(P: WeightedBallProblem) -> tuple[float, float, bool]:
    """(∫h^{n/(n−1)}e^{−f})^{(n−1)/n} against e^{4k/n}/(nβ_f^{1/n})·(∫|∇h|e^{−f} + ∫_{∂Ω}he^{−f})."""
    M, n = P.M, P.M.n
    radial, tangential = ricci_f_eigenvalues(M, P.f)
    low = float(np.min(np.minimum(radial, tangential)))
    if low < -RIC_F_TOL:
        raise CurvatureHypothesisFails(f"Ric_f reaches {low:.3e} < 0 on the grid")
    beta_f = weighted_avr(M, P.f)

    parts = _ball_integrals(P)
    lhs = parts.bulk ** ((n - 1) / n)
    rhs = math.exp(4 * P.k / n) / (n * beta_f ** (1 / n)) * (parts.gradient + parts.boundary)
    passed = lhs <= rhs * (1 + BOUND_RTOL)
    logger.info(f"Weighted Sobolev R={P.R:g}: lhs={lhs:.12g}, rhs={rhs:.12g}, k={P.k:.4g}")
    return lhs, rhs, passed


def isoperimetric_constant(n: int, k_infty: float, beta: float) -> float:
    """n·(1−(n−2)k∞)^{4(n−1)/(n(n−2))}·β^{1/n}."""
    if not (n - 2) * k_infty < 1:
        raise NotGaugeable(f"(n-2)·k_infty = {(n - 2) * k_infty:.6g} >= 1")
    return n * (1 - (n - 2) * k_infty) ** (4 * (n - 1) / (n * (n - 2))) * beta ** (1 / n)


def isoperimetric_check(M: ModelManifold, R: float, k_infty: float | None = None) -> tuple[float, float, bool]:
    """Area(∂B_R)/Vol(B_R)^{(n−1)/n} against the Kato-corrected isoperimetric constant."""
    if k_infty is None:
        k_infty = kato_constant(M).k_infty
    beta = asymptotic_volume_ratio(M)
    if not 0 < beta < math.inf:
        raise AVRUndefined(f"Asymptotic volume ratio β={beta:g} is not in (0, ∞)")
    threshold = isoperimetric_constant(M.n, k_infty, beta)
    V, A = volume_and_area(M, R)
    ratio = A / V ** ((M.n - 1) / M.n)
    passed = ratio >= threshold * (1 - BOUND_RTOL)
    logger.info(f"Isoperimetric R={R:g}: ratio={ratio:.10g}, threshold={threshold:.10g}")
    return ratio, threshold, passed


def transport_pipeline(
    P: WeightedBallProblem,
    count: int = JACOBIAN_STARTS,
    steps: int = JACOBIAN_STEPS,
    horizon: float | None = None,
) -> TransportResult:
    """Normalise, solve, sample Jacobians, check surjectivity and the weighted Sobolev inequality."""
    horizon = 4 * P.R if horizon is None else horizon
    P = normalize_scaling(P)
    T = solve_neumann_radial(P)
    T = sample_jacobians(P, T, count=count, steps=steps, horizon=horizon)
    margin = surjectivity_check(P, T, horizon)
    lhs, rhs, _ = weighted_sobolev_check(P)
    return replace(T, surjectivity_margin=margin, sobolev_lhs=lhs, sobolev_rhs=rhs)
