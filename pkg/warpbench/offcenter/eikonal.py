"""First-order fast marching for geodesic distance on the meridian half-plane.

Two points of a model manifold at radii r₀, r whose directions from the pole
make the angle ψ are at the distance of (r₀, 0) and (r, ψ) in the metric
dr² + w(r)²dψ², so one 2-D solve per source radius covers every pair.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections.abc import Callable

import numpy as np

from warpbench.errors import BadParameters, MeshTooCoarse, OutOfGrid
from warpbench.models import DistanceField, MeshSpec, ModelManifold
from warpbench.offcenter.cache import FieldCache

logger = logging.getLogger(__name__)

MIN_N_R = 256
MIN_N_PSI = 128
WINDOW = 1.25


def mesh_for_ball(
    M: ModelManifold, r0: float, R: float, n_r: int = 512, n_psi: int = 256
) -> MeshSpec:
    """Smallest (r, ψ) window that contains B_{1.25R}(r₀)."""
    if R <= 0:
        raise BadParameters(f"Ball radius must be positive, got {R}")
    reach = WINDOW * R
    r_lo = max(0.0, r0 - reach)
    r_hi = r0 + reach
    if r_hi > M.r_max:
        raise OutOfGrid(f"Ball window [{r_lo:g}, {r_hi:g}] exceeds R_max={M.r_max:g}")
    if r_lo == 0.0:
        psi_max = math.pi
    else:
        w_min = float(np.min(M.profile.w(np.linspace(r_lo, r_hi, 257))))
        psi_max = min(math.pi, reach / w_min)
    return MeshSpec(
        r_hi=r_hi,
        n_r=n_r,
        n_psi=n_psi,
        r_lo=r_lo,
        psi_max=psi_max,
        source_radius=0.3 * R,
    )


def initial_distance(M: ModelManifold, r0: float, r: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Δr² + 4·w(r)·w(r₀)·sin²(ψ/2), exact on flat space and second order near the source."""
    w = M.profile.w(r)
    w0 = float(M.profile.w(r0))
    return np.sqrt((r - r0) ** 2 + 4.0 * w * w0 * np.sin(psi / 2) ** 2)


def _update(a: float, b: float, hx: float, hy: float) -> float:
    """Upwind solution of ((T−a)/hx)² + ((T−b)/hy)² = 1, or the one-sided fallback."""
    if math.isinf(b):
        return a + hx
    if math.isinf(a):
        return b + hy
    ax, by = 1.0 / hx**2, 1.0 / hy**2
    A = ax + by
    B = -2.0 * (a * ax + b * by)
    C = a * a * ax + b * b * by - 1.0
    disc = B * B - 4.0 * A * C
    if disc >= 0:
        T = (-B + math.sqrt(disc)) / (2.0 * A)
        if T >= max(a, b):
            return T
    return min(a + hx, b + hy)


def fast_march(M: ModelManifold, r0: float, mesh: MeshSpec) -> np.ndarray:
    """Distance grid d[i, j] at (r_lo + i·hr, j·hψ) from the point (r₀, ψ = 0)."""
    n_r, n_psi = mesh.n_r, mesh.n_psi
    hr, hpsi = mesh.hr, mesh.hpsi
    r = np.linspace(mesh.r_lo, mesh.r_hi, n_r)
    psi = np.linspace(0.0, mesh.psi_max, n_psi)
    hy = (M.profile.w(r) * hpsi).tolist()
    pole = mesh.r_lo == 0.0

    extent = mesh.r_hi - mesh.r_lo
    radius = mesh.source_radius if mesh.source_radius is not None else max(0.1 * extent, 3 * hr)
    radius = max(radius, 3 * hr)
    exact = initial_distance(M, r0, r[:, None], psi[None, :])
    seed = exact <= radius
    if not np.any(seed):
        raise MeshTooCoarse(f"No mesh node lies within {radius:g} of the source r0={r0:g}")

    # plain lists: the marching loop is scalar work
    T = np.where(seed, exact, math.inf).tolist()
    fixed = [bytearray(row) for row in seed.astype(np.uint8)]
    accepted = [bytearray(n_psi) for _ in range(n_r)]
    heap = [(T[i][j], i, j) for i, j in zip(*(idx.tolist() for idx in np.nonzero(seed)))]
    heapq.heapify(heap)

    def relax(i: int, j: int) -> None:
        if accepted[i][j] or fixed[i][j]:
            return
        a = math.inf
        if i > 0 and accepted[i - 1][j]:
            a = T[i - 1][j]
        if i + 1 < n_r and accepted[i + 1][j] and T[i + 1][j] < a:
            a = T[i + 1][j]
        b = math.inf
        row = T[i]
        if j > 0 and accepted[i][j - 1]:
            b = row[j - 1]
        if j + 1 < n_psi and accepted[i][j + 1] and row[j + 1] < b:
            b = row[j + 1]
        if a == math.inf and b == math.inf:
            return
        t = _update(a, b, hr, hy[i]) if hy[i] > 0 else a + hr
        if t < row[j]:
            row[j] = t
            heapq.heappush(heap, (t, i, j))

    while heap:
        t, i, j = heapq.heappop(heap)
        if accepted[i][j] or t > T[i][j]:
            continue
        if pole and i == 0:
            # the whole ψ-row at r = 0 is the single point o
            T[0] = [t] * n_psi
            accepted[0] = bytearray(b"\x01" * n_psi)
            if n_r > 1:
                for jj in range(n_psi):
                    relax(1, jj)
            continue
        accepted[i][j] = 1
        if i > 0:
            relax(i - 1, j)
        if i + 1 < n_r:
            relax(i + 1, j)
        if j > 0:
            relax(i, j - 1)
        if j + 1 < n_psi:
            relax(i, j + 1)

    return np.array(T, dtype=np.float64)


def distance_field(
    M: ModelManifold,
    r0: float,
    mesh: MeshSpec | None = None,
    cache: FieldCache | None = None,
) -> DistanceField:
    """Geodesic distance from a point at radius r₀ over the (r, ψ) mesh."""
    if not 0 <= r0 <= M.r_max / 2:
        raise BadParameters(f"Source radius r0={r0:g} outside [0, R_max/2]")
    mesh = mesh or mesh_for_ball(M, r0, max(1.0, r0))
    if mesh.n_r < MIN_N_R or mesh.n_psi < MIN_N_PSI:
        raise MeshTooCoarse(f"Mesh {mesh.n_r}x{mesh.n_psi} is below {MIN_N_R}x{MIN_N_PSI}")
    if mesh.r_hi > M.r_max:
        raise OutOfGrid(f"Mesh reaches r={mesh.r_hi:g} beyond R_max={M.r_max:g}")

    fingerprint = M.profile.fingerprint()
    d = cache.get(fingerprint, r0, mesh) if cache else None
    if d is None:
        d = fast_march(M, r0, mesh)
        logger.info(f"Fast marching r0={r0:g}: mesh {mesh.n_r}x{mesh.n_psi}, max d={d.max():.4g}")
        if cache:
            cache.put(fingerprint, r0, mesh, d)
    return DistanceField(source=r0, mesh=mesh, d=d, fingerprint=fingerprint)


def eikonal_convergence_order(
    M: ModelManifold,
    r0: float,
    mesh: MeshSpec,
    exact: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    cache: FieldCache | None = None,
) -> float:
    """Observed order log2(e_h / e_{h/2}) of the mean error on the coarse nodes.

    Without a closed form the reference is the mesh refined twice more.
    """
    coarse = distance_field(M, r0, mesh, cache)
    fine = distance_field(M, r0, mesh.doubled(), cache)
    r, psi = np.meshgrid(coarse.r, coarse.psi, indexing="ij")
    if exact is not None:
        ref = exact(r, psi)
    else:
        ref = distance_field(M, r0, mesh.doubled().doubled(), cache).d[::4, ::4]

    outside = coarse.d > (mesh.source_radius or 3 * mesh.hr)
    e_h = float(np.mean(np.abs(coarse.d - ref)[outside]))
    e_h2 = float(np.mean(np.abs(fine.d[::2, ::2] - ref)[outside]))
    if e_h2 == 0:
        return math.inf
    order = math.log2(e_h / e_h2)
    logger.info(f"Eikonal errors {e_h:.3e} -> {e_h2:.3e}: observed order {order:.3f}")
    return order
