"""Core data models for warpbench."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from warpbench.errors import BadParameters, OutOfGrid

if TYPE_CHECKING:
    from warpbench.profiles.base import WarpingProfile


class ProfileKind(str, Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"
    CONE = "cone"
    PERTURBED = "perturbed"
    TABULATED = "tabulated"
    SCALED = "scaled"


class Command(str, Enum):
    REPORT_CURVATURE = "report-curvature"
    REPORT_KATO = "report-kato"
    VERIFY_ISOPERIMETRIC = "verify-isoperimetric"
    VERIFY_ABP = "verify-abp"
    VERIFY_GREEN_BOUNDS = "verify-green-bounds"
    VERIFY_OFFCENTER = "verify-offcenter"
    SWEEP = "sweep"


# ── Radial sampling ───────────────────────────────────────────────


@dataclass(frozen=True)
class GridSpec:
    """Log-uniform radial grid on [r_min, r_max]; the pole r = 0 is handled analytically."""

    r_min: float = 1e-6
    r_max: float = 1e4
    count: int = 4096

    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.count)

    def scaled(self, s: float) -> GridSpec:
        return GridSpec(r_min=self.r_min * s, r_max=self.r_max * s, count=self.count)

    def refined(self) -> GridSpec:
        """Same range with every interval halved."""
        return GridSpec(r_min=self.r_min, r_max=self.r_max, count=2 * self.count - 1)


@dataclass(frozen=True, eq=False)
class RadialField:
    """A sampled radial function with cubic-spline interpolation.

    Log-scale fields are splined in s = log r, which keeps pole-side power
    laws smooth; linear fields (ball grids that contain r = 0) are splined in r.
    Fields built from a closed form may carry exact first and second
    derivatives, which replace the spline ones.
    """

    r: np.ndarray
    values: np.ndarray
    name: str = ""
    log_scale: bool = True
    exact_derivatives: tuple[Callable, Callable] | None = field(default=None, repr=False)

    def _coord(self, r: np.ndarray | float) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return np.log(r) if self.log_scale else r

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self._coord(self.r), self.values)

    def _clip(self, r: np.ndarray | float) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if np.any(r > self.r[-1] * (1 + 1e-12)):
            raise OutOfGrid(f"{self.name or 'field'} evaluated beyond r={self.r[-1]:g}")
        return np.clip(r, self.r[0], self.r[-1])

    def __call__(self, r: np.ndarray | float) -> np.ndarray | float:
        out = self._spline(self._coord(self._clip(r)))
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, r: np.ndarray | float, order: int = 1) -> np.ndarray | float:
        """First or second derivative in r."""
        rc = self._clip(r)
        if self.exact_derivatives is not None and order in (1, 2):
            out = np.asarray(self.exact_derivatives[order - 1](rc), dtype=np.float64)
            return float(out) if np.ndim(out) == 0 else out
        x = self._coord(rc)
        if not self.log_scale:
            out = self._spline(x, order)
        elif order == 1:
            out = self._spline(x, 1) / rc
        elif order == 2:
            out = (self._spline(x, 2) - self._spline(x, 1)) / rc**2
        else:
            raise ValueError(f"Unsupported derivative order {order}")
        return float(out) if np.ndim(out) == 0 else out

    def sup(self) -> float:
        return float(np.max(self.values))

    def inf(self) -> float:
        return float(np.min(self.values))

    def argmax(self) -> float:
        return float(self.r[int(np.argmax(self.values))])

    def scaled(self, c: float) -> RadialField:
        exact = None
        if self.exact_derivatives is not None:
            d1, d2 = self.exact_derivatives
            exact = (lambda x: c * d1(x), lambda x: c * d2(x))
        return RadialField(self.r, c * self.values, self.name, self.log_scale, exact)

    @classmethod
    def from_function(
        cls,
        r: np.ndarray,
        fn: Callable,
        name: str = "",
        log_scale: bool = True,
        derivatives: tuple[Callable, Callable] | None = None,
    ) -> RadialField:
        values = np.asarray(fn(r), dtype=np.float64) * np.ones_like(r)
        return cls(r, values, name, log_scale, derivatives)

    @classmethod
    def constant(cls, r: np.ndarray, value: float, name: str = "") -> RadialField:
        return cls(r, np.full_like(r, float(value)), name)


@dataclass(frozen=True, eq=False)
class ModelManifold:
    """Dimension n >= 3 with a warping profile and the radial grid policy."""

    n: int
    profile: WarpingProfile
    grid: GridSpec = field(default_factory=GridSpec)

    @cached_property
    def radii(self) -> np.ndarray:
        return self.grid.radii()

    @cached_property
    def w(self) -> np.ndarray:
        return self.profile.w(self.radii)

    @cached_property
    def dw(self) -> np.ndarray:
        return self.profile.dw(self.radii)

    @cached_property
    def d2w(self) -> np.ndarray:
        return self.profile.d2w(self.radii)

    @property
    def r_max(self) -> float:
        return self.grid.r_max

    def with_grid(self, grid: GridSpec) -> ModelManifold:
        return ModelManifold(self.n, self.profile, grid)

    def describe(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "profile": self.profile.describe(),
            "grid": asdict(self.grid),
        }


# ── Curvature and kernels ─────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    """Ricci eigenvalues, Ric₋ and the curvature envelope of a model manifold."""

    ric_radial: RadialField
    ric_tangential: RadialField
    ric_minus: RadialField
    lam: RadialField  # non-increasing, (n-1)·lam >= ric_minus
    K: float
    alpha: float
    b0: float  # math.inf when the envelope budget diverges
    lambda0: float  # lam(0), taken as the envelope supremum

    @property
    def b0_finite(self) -> bool:
        return math.isfinite(self.b0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "K": self.K,
            "alpha": self.alpha,
            "b0": self.b0,
            "lambda0": self.lambda0,
            "sup_ric_minus": self.ric_minus.sup(),
        }


@dataclass(frozen=True, eq=False)
class GreenKernel:
    """Pole Green kernel G(r) = (1/ω)∫_r^∞ w^{1-n}."""

    G: RadialField
    dG: RadialField
    nonparabolic: bool
    harmonicity_residual: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "nonparabolic": self.nonparabolic,
            "G_at_r_min": float(self.G.values[0]),
            "harmonicity_residual": self.harmonicity_residual,
        }


@dataclass(frozen=True, eq=False)
class KatoReport:
    k_infty: float
    u: RadialField
    argmax_radius: float
    gauge_feasible: bool
    gamma: float  # math.inf when not feasible

    def to_dict(self) -> dict[str, Any]:
        return {
            "k_infty": self.k_infty,
            "argmax_radius": self.argmax_radius,
            "gauge_feasible": self.gauge_feasible,
            "gamma": self.gamma,
        }


@dataclass(frozen=True, eq=False)
class GaugeFunction:
    phi: RadialField
    f: RadialField  # log(phi)/(n-2)
    dphi: RadialField
    lap_phi: RadialField
    iterations: int
    residual: float
    residual_bound: float = 0.0  # 1e-6·sup Ric₋·sup φ

    @property
    def residual_ok(self) -> bool:
        return self.residual <= self.residual_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            "sup_phi": self.phi.sup(),
            "inf_phi": self.phi.inf(),
            "iterations": self.iterations,
            "residual": self.residual,
            "residual_bound": self.residual_bound,
        }


# ── Transport ─────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class WeightedBallProblem:
    """Ball Ω = B_R(o) with radial weight f and positive radial test function h."""

    M: ModelManifold
    R: float
    f: RadialField
    h: RadialField
    normalized: bool = False

    @property
    def k(self) -> float:
        """Half the oscillation of f over the whole grid."""
        return 0.5 * (self.f.sup() - self.f.inf())

    @classmethod
    def unweighted(cls, M: ModelManifold, R: float) -> WeightedBallProblem:
        return cls(
            M, R, RadialField.constant(M.radii, 0.0, "f"), RadialField.constant(M.radii, 1.0, "h")
        )

    def with_h(self, h: RadialField, normalized: bool) -> WeightedBallProblem:
        return replace(self, h=h, normalized=normalized)


@dataclass(frozen=True)
class JacobianSample:
    x_bar: float
    t: float
    det_p: float
    bound: float
    hypothesis_holds: bool = True  # Ric_f(γ̇,γ̇) >= 0 along the geodesic so far

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TransportResult:
    problem: WeightedBallProblem
    u: RadialField
    du: RadialField
    d2u: RadialField
    lap_f_u: RadialField
    u_set: list[tuple[float, float]]
    a_r_set: list[tuple[float, float]] = field(default_factory=list)
    a_r_sampled: bool = False
    jacobian_samples: list[JacobianSample] = field(default_factory=list)
    riccati_residuals: list[float] = field(default_factory=list)
    conjugate_points: list[tuple[float, float]] = field(default_factory=list)  # (x̄, t)
    surjectivity_margin: float | None = None
    sobolev_lhs: float | None = None
    sobolev_rhs: float | None = None

    def in_u(self, x: float) -> bool:
        return any(a <= x < b for a, b in self.u_set)

    def in_a_r(self, x: float) -> bool:
        return any(a <= x <= b for a, b in self.a_r_set)

    def to_dict(self) -> dict[str, Any]:
        return {
            "R": self.problem.R,
            "du_at_R": float(self.du.values[-1]),
            "u_set": [list(iv) for iv in self.u_set],
            "a_r_set": [list(iv) for iv in self.a_r_set],
            "a_r_sampled": self.a_r_sampled,
            "jacobian_samples": len(self.jacobian_samples),
            "max_riccati_residual": max(self.riccati_residuals, default=None),
            "conjugate_points": [list(p) for p in self.conjugate_points],
            "surjectivity_margin": self.surjectivity_margin,
            "sobolev_lhs": self.sobolev_lhs,
            "sobolev_rhs": self.sobolev_rhs,
        }


# ── Off-center geometry ───────────────────────────────────────────


@dataclass(frozen=True)
class MeshSpec:
    """(r, ψ) mesh for the eikonal solve. Reflective at ψ = 0, and at ψ = π when psi_max = π."""

    r_hi: float
    n_r: int = 512
    n_psi: int = 256
    r_lo: float = 0.0
    psi_max: float = math.pi
    source_radius: float | None = None  # exact-initialisation disc around the source

    @property
    def hr(self) -> float:
        return (self.r_hi - self.r_lo) / (self.n_r - 1)

    @property
    def hpsi(self) -> float:
        return self.psi_max / (self.n_psi - 1)

    def doubled(self) -> MeshSpec:
        return replace(self, n_r=2 * self.n_r - 1, n_psi=2 * self.n_psi - 1)

    def key(self) -> str:
        return (
            f"{self.r_lo!r}:{self.r_hi!r}:{self.n_r}:{self.psi_max!r}:{self.n_psi}:"
            f"{self.source_radius!r}"
        )


@dataclass(frozen=True, eq=False)
class DistanceField:
    source: float
    mesh: MeshSpec
    d: np.ndarray  # shape (n_r, n_psi)
    fingerprint: str = ""

    @cached_property
    def r(self) -> np.ndarray:
        return np.linspace(self.mesh.r_lo, self.mesh.r_hi, self.mesh.n_r)

    @cached_property
    def psi(self) -> np.ndarray:
        return np.linspace(0.0, self.mesh.psi_max, self.mesh.n_psi)

    @cached_property
    def _interp(self) -> RegularGridInterpolator:
        return RegularGridInterpolator((self.r, self.psi), self.d, bounds_error=True)

    def at(self, r: float, psi: float) -> float:
        psi = abs(psi)
        if psi > math.pi:
            psi = 2 * math.pi - psi
        try:
            return float(self._interp([[r, psi]])[0])
        except ValueError as e:
            raise OutOfGrid(f"({r:g}, {psi:g}) lies outside the distance mesh") from e

    def sample(self, r: np.ndarray, psi: np.ndarray) -> np.ndarray:
        """Vectorised lookup; ψ is folded into [0, π]."""
        psi = np.abs(np.asarray(psi, dtype=np.float64))
        psi = np.where(psi > math.pi, 2 * math.pi - psi, psi)
        pts = np.column_stack([np.asarray(r, dtype=np.float64).ravel(), psi.ravel()])
        try:
            return self._interp(pts)
        except ValueError as e:
            raise OutOfGrid("Sample points lie outside the distance mesh") from e


@dataclass(frozen=True)
class AhlforsReport:
    v0_emp: float
    V0_emp: float
    samples: list[tuple[float, float, float]]  # (center radius, ball radius, vol/r^n)
    spread_limit: float
    hypotheses_met: bool = True

    @property
    def spread(self) -> float:
        return self.V0_emp / self.v0_emp if self.v0_emp > 0 else math.inf

    @property
    def ahlfors_ok(self) -> bool:
        return (
            self.hypotheses_met
            and 0 < self.v0_emp <= self.V0_emp < math.inf
            and self.spread <= self.spread_limit
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "v0_emp": self.v0_emp,
            "V0_emp": self.V0_emp,
            "spread": self.spread,
            "ahlfors_ok": self.ahlfors_ok,
        }


@dataclass(frozen=True)
class VCReport:
    xi_emp: float
    ratios: list[tuple[float, float]]  # (r, vol(B_r(o))/vol(B_{r/2}(x)))
    bounded: bool

    def to_dict(self) -> dict[str, Any]:
        return {"xi_emp": self.xi_emp, "bounded": self.bounded}


# ── Constant ledger ───────────────────────────────────────────────


@dataclass(frozen=True)
class Calibration:
    """Named stand-ins for the unspecified dimensional constants C(n).

    Every bound using them is shape-exact (exponents, monotonicity) and
    constant-calibrated (absolute size set here).
    """

    c_harnack: float = 1.0
    c_meanvalue: float = 1.0
    c_litam: float = 1.0
    c_green: float = 1.0
    c_ab: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0 and math.isfinite(value)):
                raise BadParameters(f"Calibration {name} must be positive, got {value}")

    def with_overrides(self, **overrides: float) -> Calibration:
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise BadParameters(f"Unknown calibration keys: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    value: float
    formula: str
    anchor: str  # content tag of the estimate, or "plumbing"
    inputs: dict[str, Any] = field(default_factory=dict)
    calibration: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ThresholdWitness:
    parameter: str  # "K" or "b0"
    value: float
    c1: float
    target: float
    bracket: list[tuple[float, float]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "parameter": self.parameter,
            "value": self.value,
            "c1": self.c1,
            "target": self.target,
            "steps": len(self.bracket),
        }


@dataclass(frozen=True)
class DominanceReport:
    c_star: float
    green_ok: bool
    k_infty: float
    c1_case_a: float | None
    c1_case_b: float | None
    exponent_r: float
    exponent_delta: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        kato_ok = all(c is None or c >= self.k_infty for c in (self.c1_case_a, self.c1_case_b))
        return self.green_ok and kato_ok

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["passed"] = self.passed
        return d


# ── Scenarios ─────────────────────────────────────────────────────


@dataclass
class Scenario:
    """One CLI run: a manifold, a command and its parameters."""

    name: str
    command: Command
    manifold: dict[str, Any]
    tail: dict[str, float] = field(default_factory=dict)
    weight: dict[str, Any] = field(default_factory=dict)
    params: dict[str, str] = field(default_factory=dict)
    calibration: Calibration = field(default_factory=Calibration)
    tol: float = 1e-9
    out_dir: str | None = None
    parallel: int = 1


@dataclass
class ScenarioResult:
    scenario: str
    command: Command
    exit_code: int
    rows: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    error: dict[str, str] | None = None

    @property
    def passed(self) -> bool:
        return self.exit_code == 0
