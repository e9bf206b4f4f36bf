"""Off-center ball volumes, Ahlfors regularity, condition (VC) and annulus covering counts."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.integrate import trapezoid

from warpbench.errors import BadParameters, BallExitsGrid, InequalityViolated, MeshTooCoarse
from warpbench.geometry import (
    asymptotic_volume_ratio,
    curvature_envelope,
    sphere_area,
    volume_and_area,
)
from warpbench.ledger import covering_bound
from warpbench.models import AhlforsReport, DistanceField, MeshSpec, ModelManifold, VCReport
from warpbench.offcenter.cache import FieldCache
from warpbench.offcenter.eikonal import distance_field, mesh_for_ball

logger = logging.getLogger(__name__)

DEFAULT_CENTERS = (0.0, 1.0, 5.0, 20.0)
DEFAULT_RADII = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0)
SPREAD_LIMIT = 1e3
XI_LIMIT = 1e3
XI_GROWTH = 1.5


def _open_boundary_min(D: DistanceField) -> float:
    """Smallest distance on the mesh edges that are not symmetry axes or the pole."""
    mesh = D.mesh
    edges = [D.d[-1, :]]
    if mesh.r_lo > 0:
        edges.append(D.d[0, :])
    if mesh.psi_max < math.pi - 1e-12:
        edges.append(D.d[:, -1])
    return float(min(e.min() for e in edges))


def ball_volume_offcenter(M: ModelManifold, D: DistanceField, R: float) -> float:
    """∫ 1{d < R} ω_{n−2} w^{n−1} sin^{n−2}ψ dr dψ, the indicator ramped over one cell."""
    if R <= 0:
        raise BadParameters(f"Ball radius must be positive, got {R}")
    boundary = _open_boundary_min(D)
    if boundary <= R:
        raise BallExitsGrid(
            f"B_{R:g}({D.source:g}) reaches the mesh edge (nearest edge distance {boundary:.4g})"
        )
    n = M.n
    r, psi = D.r, D.psi
    cell = D.mesh.hr
    inside = np.clip((R - D.d) / cell + 0.5, 0.0, 1.0)
    density = (
        sphere_area(n - 2)
        * (M.profile.w(r)[:, None] ** (n - 1))
        * (np.sin(psi)[None, :] ** (n - 2))
    )
    return float(trapezoid(trapezoid(inside * density, psi, axis=1), r))


def ball_volume(
    M: ModelManifold,
    center: float,
    R: float,
    n_r: int = 512,
    n_psi: int = 256,
    cache: FieldCache | None = None,
) -> float:
    """vol B_R(x) for a point x at radius `center`; pole-centred balls use the radial quadrature."""
    if center == 0:
        return volume_and_area(M, R)[0]
    D = distance_field(M, center, mesh_for_ball(M, center, R, n_r, n_psi), cache)
    return ball_volume_offcenter(M, D, R)


def ahlfors_check(
    M: ModelManifold,
    centers: list[float] | tuple[float, ...] = DEFAULT_CENTERS,
    radii: list[float] | tuple[float, ...] = DEFAULT_RADII,
    n_r: int = 512,
    n_psi: int = 256,
    spread_limit: float = SPREAD_LIMIT,
    cache: FieldCache | None = None,
) -> AhlforsReport:
    """Empirical extremes of vol B_r(y)/r^n over sampled centres and radii."""
    report = curvature_envelope(M)
    beta = asymptotic_volume_ratio(M)
    hypotheses = report.b0_finite and 0 < beta < math.inf
    if not hypotheses:
        logger.warning(f"Ahlfors hypotheses not met: b0={report.b0:.4g}, beta={beta:.4g}")

    samples: list[tuple[float, float, float]] = []
    for center in centers:
        for R in radii:
            vol = ball_volume(M, center, R, n_r, n_psi, cache)
            samples.append((float(center), float(R), vol / R**M.n))
            logger.debug(f"Ahlfors sample y={center:g}, r={R:g}: vol/r^n={vol / R**M.n:.6g}")

    ratios = [s[2] for s in samples]
    out = AhlforsReport(
        v0_emp=min(ratios),
        V0_emp=max(ratios),
        samples=samples,
        spread_limit=spread_limit,
        hypotheses_met=hypotheses,
    )
    if not out.ahlfors_ok:
        logger.warning(f"Ahlfors regularity flagged: spread {out.spread:.4g} (limit {spread_limit:g})")
    else:
        logger.info(f"Ahlfors: v0={out.v0_emp:.6g}, V0={out.V0_emp:.6g}, spread {out.spread:.4g}")
    return out


def vc_check(
    M: ModelManifold,
    radii: list[float] | tuple[float, ...] = DEFAULT_RADII,
    n_r: int = 512,
    n_psi: int = 256,
    xi_limit: float = XI_LIMIT,
    cache: FieldCache | None = None,
) -> VCReport:
    """max_r vol B_r(o) / vol B_{r/2}(x) for x on ∂B_r(o).

    All points of ∂B_r(o) are equivalent under rotation, so one x per r is enough.
    """
    ratios: list[tuple[float, float]] = []
    for r in sorted(radii):
        big = volume_and_area(M, r)[0]
        small = ball_volume(M, r, r / 2, n_r, n_psi, cache)
        ratios.append((float(r), big / small))
        logger.debug(f"VC r={r:g}: ratio {big / small:.6g}")

    values = [q for _, q in ratios]
    xi = max(values)
    growing = len(values) > 1 and values[-1] > XI_GROWTH * values[-2]
    bounded = xi <= xi_limit and not growing
    if not bounded:
        logger.warning(f"Condition (VC) flagged: xi_emp={xi:.4g}, ratios {values}")
    return VCReport(xi_emp=xi, ratios=ratios, bounded=bounded)


def _meridian_candidates(
    M: ModelManifold, R: float, Q: float, spacing: float
) -> tuple[np.ndarray, np.ndarray]:
    rows = np.linspace(R, Q * R, max(2, int(math.ceil((Q - 1) * R / spacing)) + 1))
    rs, psis = [], []
    for r in rows:
        m = max(2, int(math.ceil(math.pi * float(M.profile.w(r)) / spacing)) + 1)
        psi = np.linspace(0.0, math.pi, m)
        rs.append(np.full(m, r))
        psis.append(psi)
    return np.concatenate(rs), np.concatenate(psis)


def covering_count_empirical(
    M: ModelManifold,
    R: float,
    Q: float,
    alpha: float,
    ahlfors: AhlforsReport | None = None,
    n_r: int = 256,
    n_psi: int = 128,
    cache: FieldCache | None = None,
) -> int:
    """Greedy maximal αR-separated set in the meridian section of B_{QR} ∖ B_R.

    The balls of radius αR around the chosen points cover the section. The
    count is checked against the covering formula with the empirical Ahlfors
    constants (v0_emp, V0_emp) of `ahlfors`, sampled with a default
    ahlfors_check when not given.
    """
    if not (Q > 1 and 0 < alpha <= (Q - 1) / 4 * (1 + 1e-12)):
        raise BadParameters(f"Need Q > 1 and 0 < alpha <= (Q-1)/4, got Q={Q:g}, alpha={alpha:g}")
    sep = alpha * R
    mesh = MeshSpec(r_hi=Q * R + sep, n_r=n_r, n_psi=n_psi, source_radius=0.3 * sep)
    if mesh.hr > sep / 4:
        raise MeshTooCoarse(f"Radial step {mesh.hr:.3g} cannot resolve separation {sep:.3g}")

    cand_r, cand_psi = _meridian_candidates(M, R, Q, sep / 2)
    covered = np.zeros(len(cand_r), dtype=bool)
    fields: dict[float, DistanceField] = {}
    count = 0
    while not covered.all():
        k = int(np.argmin(covered))
        r_c, psi_c = float(cand_r[k]), float(cand_psi[k])
        if r_c not in fields:
            fields[r_c] = distance_field(M, r_c, mesh, cache)
        d = fields[r_c].sample(cand_r, cand_psi - psi_c)
        covered |= d <= sep
        covered[k] = True
        count += 1

    if ahlfors is None:
        ahlfors = ahlfors_check(M, cache=cache)
    bound = covering_bound(ahlfors.v0_emp, ahlfors.V0_emp, alpha, Q, M.n)
    logger.info(
        f"Covering R={R:g}, Q={Q:g}, alpha={alpha:g}: {count} balls "
        f"(formula bound {bound:.6g} from v0={ahlfors.v0_emp:.6g}, V0={ahlfors.V0_emp:.6g})"
    )
    if count > bound:
        raise InequalityViolated(f"Greedy cover uses {count} balls, above the formula bound {bound:.6g}")
    return count
