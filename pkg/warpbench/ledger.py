"""Explicit constants and chained bounds of the Green-function and Kato estimates.

Every formula is exact in its shape (exponents, monotonicity). The anonymous
dimensional constants it depends on come from a `Calibration`, so absolute
values are only as meaningful as the calibration used; tests target shape
and dominance over exact model-manifold values.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Iterable
from typing import Any

import numpy as np
from scipy.integrate import quad

from warpbench.errors import (
    AlphaTooSmall,
    BadParameters,
    DominanceFailure,
    KZero,
    NotGaugeable,
    RadiusTooLarge,
    WarpbenchError,
)
from warpbench.geometry import asymptotic_volume_ratio, curvature_envelope, volume_field
from warpbench.models import (
    Calibration,
    DominanceReport,
    LedgerEntry,
    ModelManifold,
    ThresholdWitness,
)
from warpbench.radial import green_pole, kato_constant
from warpbench.transport import isoperimetric_constant

logger = logging.getLogger(__name__)

ANCHORS = frozenset(
    {
        "covering",
        "harnack",
        "mean-value",
        "li-tam-fan",
        "oscillation-chain",
        "green-offcenter",
        "kato-decay-a",
        "kato-decay-b",
        "sobolev-kato",
        "plumbing",
    }
)

DELTA_GRID = np.geomspace(1e-2, 1e3, 64)
DOMINANCE_DELTAS = (0.0, 1.0, 2.0, 5.0)
DOMINANCE_RADII = tuple(np.round(np.linspace(0.1, 1.0, 10), 10))
EXPONENT_TOL = 1e-6
IDENTITY_TOL = 1e-12
BISECT_STEPS = 60
RHO = 1.0 / 12.0


class ConstantLedger:
    """Ordered record of evaluated constants with their formula and provenance."""

    def __init__(self, calibration: Calibration | None = None):
        self.calibration = calibration or Calibration()
        self.entries: list[LedgerEntry] = []

    def record(
        self,
        name: str,
        value: float,
        formula: str,
        anchor: str,
        inputs: dict[str, Any] | None = None,
        calibrated: bool = True,
    ) -> float:
        if anchor not in ANCHORS:
            raise BadParameters(f"Unknown ledger anchor {anchor!r}")
        entry = LedgerEntry(
            name=name,
            value=float(value),
            formula=formula,
            anchor=anchor,
            inputs=dict(inputs or {}),
            calibration=self.calibration.to_dict() if calibrated else {},
        )
        self.entries.append(entry)
        logger.debug(f"Ledger {name} = {value:.6g} [{anchor}]")
        return float(value)

    def get(self, name: str) -> LedgerEntry:
        for entry in reversed(self.entries):
            if entry.name == name:
                return entry
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.entries)

    def to_rows(self) -> list[dict[str, Any]]:
        return [e.to_dict() for e in self.entries]

    def to_json(self) -> str:
        return json.dumps(self.to_rows(), sort_keys=True, indent=2, default=_json_default)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Cannot serialise {type(value).__name__}")


def _positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise BadParameters(f"{name} must be positive, got {value}")


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# ── Covering ──────────────────────────────────────────────────────


def covering_bound(
    v0: float, V0: float, alpha: float, Q: float, n: int, ledger: ConstantLedger | None = None
) -> float:
    """Number of αR-balls covering B_{QR} ∖ B_R under v0·rⁿ <= vol B_r <= V0·rⁿ."""
    _positive(v0=v0, alpha=alpha)
    if V0 < v0:
        raise BadParameters(f"Need v0 <= V0, got v0={v0:g}, V0={V0:g}")
    if not alpha <= (Q - 1) / 4 * (1 + 1e-12):
        raise BadParameters(f"Need alpha <= (Q-1)/4, got alpha={alpha:g}, Q={Q:g}")
    bracket = V0 * (Q + alpha / 2) ** n - v0 * (1 - alpha / 2) ** n
    value = (2 / alpha) ** n * bracket / v0
    if ledger is not None:
        ledger.record(
            "covering_bound",
            value,
            "v0^-1 (2/a)^n [V0 (Q+a/2)^n - v0 (1-a/2)^n]",
            "covering",
            {"v0": v0, "V0": V0, "alpha": alpha, "Q": Q, "n": n},
            calibrated=False,
        )
    return value


def covering_annulus_count(n: int, v0: float, V0: float) -> float:
    """ℓ(n, v0, V0): balls of radius R/4 covering B_{2R} ∖ B_R, independent of R."""
    return covering_bound(v0, V0, 0.25, 2.0, n)


def covering_fine_count(n: int, v0: float, V0: float, R: float) -> float:
    """ℓ̂·Rⁿ: balls of radius 1/48 covering B_{64R} ∖ B_R for R > 1/6."""
    if not R > 1 / 6:
        raise BadParameters(f"The fine covering needs R > 1/6, got {R:g}")
    return covering_bound(v0, V0, 1 / (12 * R), 64.0, n)


def _fine_coefficient(n: int, v0: float, V0: float) -> float:
    # sup over R > 1/6 of covering_fine_count / Rⁿ, reached as R → 1/6
    return covering_bound(v0, V0, 0.5, 64.0, n) * 6.0**n


# ── Harnack, mean value, Li–Tam ───────────────────────────────────


def harnack_constant(n: int, theta: float, R: float, cal: Calibration | None = None) -> float:
    """e^{c(1+√θ·R)} for positive harmonic functions on B_R with Ric >= −(n−1)θ."""
    cal = cal or Calibration()
    if theta < 0:
        raise BadParameters(f"theta must be non-negative, got {theta}")
    _positive(R=R)
    return _safe_exp(cal.c_harnack * (1 + math.sqrt(theta) * R))


def meanvalue_constant(
    n: int, theta: float, lam: float, R: float, cal: Calibration | None = None
) -> float:
    """c·e^{c(R√θ + R²λ)} for subsolutions of Δg >= −λg on B_{2R}."""
    cal = cal or Calibration()
    if theta < 0 or lam < 0:
        raise BadParameters(f"theta and lambda must be non-negative, got {theta}, {lam}")
    _positive(R=R)
    c = cal.c_meanvalue
    return c * _safe_exp(c * (R * math.sqrt(theta) + R**2 * lam))


def litam_fan_constant(K: float, n: int, xi: float, cal: Calibration | None = None) -> float:
    """K^{−n/2}·exp((1+ξ)·exp(c(1+√K))), doubly exponential in the curvature."""
    cal = cal or Calibration()
    if K <= 0:
        raise KZero("The Li-Tam constant blows up as K -> 0")
    _positive(xi=xi)
    inner = _safe_exp(cal.c_litam * (1 + math.sqrt(K)))
    return K ** (-n / 2) * _safe_exp((1 + xi) * inner)


# ── Oscillation chain and Green bound ─────────────────────────────


def oscillation_exponents(n: int) -> tuple[float, float]:
    """Exponents of δ and r in the oscillation chain bound."""
    return 1.5 * n - 1, 1 - n / 2


def _reduce_delta(K: float, delta: float) -> tuple[float, float]:
    # Ric >= −(n−1)K/(1+(d−δ)²) implies the same with (2K, δ = 1) when δ < 1
    if delta < 1:
        return 2 * K, 1.0
    return K, delta


def oscillation_constant(n: int, K: float, v0: float, V0: float, cal: Calibration | None = None) -> float:
    """The constant C(n, K, v0, V0) of the oscillation chain, assembled from its pieces.

    Dyadic annuli far from the curvature bump contribute ℓ mean-value
    oscillations summed over a geometric series; the annulus near it adds
    ℓ̂ ~ δⁿ balls of the fixed radius ρ/4.
    """
    cal = cal or Calibration()
    _positive(v0=v0)
    if K < 0:
        raise BadParameters(f"K must be non-negative, got {K}")
    ell = covering_annulus_count(n, v0, V0)
    ell_hat = _fine_coefficient(n, v0, V0)

    # |∇f|² <= C_mv / vol(B_{s/16}) ∫|∇f|², and osc over B_{s/4} <= (s/4)·sup|∇f|
    mv_far = meanvalue_constant(n, 9 * K, 18 * (n - 1) * K, 1 / 16, cal)
    mv_near = meanvalue_constant(n, K, 2 * (n - 1) * K, RHO / 16, cal)
    osc_far = 0.25 * math.sqrt(mv_far * 16.0**n / v0)
    osc_near = 0.25 * math.sqrt(mv_near * 16.0**n / v0) * RHO ** (1 - n / 2)

    dyadic = 1 / (1 - 2 ** (1 - n / 2))
    return ell * osc_far * dyadic + ell_hat * 6 ** (n / 2 - 1) * osc_near


def oscillation_chain_bound(
    n: int,
    K: float,
    v0: float,
    V0: float,
    delta: float,
    r: float,
    cal: Calibration | None = None,
    ledger: ConstantLedger | None = None,
) -> float:
    """C·δ^{3n/2−1}·r^{1−n/2}, the oscillation of a harmonic function outside B_r per unit energy."""
    _positive(r=r)
    if delta < 0:
        raise BadParameters(f"delta must be non-negative, got {delta}")
    K_eff, delta_eff = _reduce_delta(K, delta)
    a, b = oscillation_exponents(n)
    C = oscillation_constant(n, K_eff, v0, V0, cal)
    value = C * delta_eff**a * r**b
    if ledger is not None:
        ledger.record(
            "oscillation_chain_bound",
            value,
            "C(n,K,v0,V0) delta^(3n/2-1) r^(1-n/2)",
            "oscillation-chain",
            {"n": n, "K": K, "K_effective": K_eff, "v0": v0, "V0": V0, "delta": delta, "r": r},
        )
    return value


def green_bound(
    n: int,
    K: float,
    v0: float,
    V0: float,
    delta: float,
    r: float,
    cal: Calibration | None = None,
    ledger: ConstantLedger | None = None,
) -> float:
    """c_green·max{1, δ^{3n−2}}·r^{2−n} for G(p, x) with d(o, p) = δ and d(p, x) = r <= 1."""
    cal = cal or Calibration()
    if r > 1:
        raise RadiusTooLarge(f"The off-center Green bound holds for r <= 1, got r={r:g}")
    _positive(r=r)
    if delta < 0:
        raise BadParameters(f"delta must be non-negative, got {delta}")
    K_eff, _ = _reduce_delta(K, delta)
    value = cal.c_green * max(1.0, delta ** (3 * n - 2)) * r ** (2 - n)
    if ledger is not None:
        ledger.record(
            "green_bound",
            value,
            "c_green max{1, delta^(3n-2)} r^(2-n)",
            "green-offcenter",
            {"n": n, "K": K, "K_effective": K_eff, "v0": v0, "V0": V0, "delta": delta, "r": r},
        )
    return value


def green_constant_log10(
    n: int,
    K: float,
    v0: float,
    V0: float,
    cal: Calibration | None = None,
    ledger: ConstantLedger | None = None,
) -> float:
    """log10 of the Green constant obtained by chaining every estimate with δ >= 1.

    Harnack chains of ℓ balls on both sides of the oscillation estimate, the
    energy bound ∫|∇G|² <= 4 sup G, the factor 36^{n−2} for radii near δ and
    the two nine-ball Harnack chains onto ∂B_r(p). The value overflows
    doubles for every realistic ℓ, hence the logarithm.
    """
    cal = cal or Calibration()
    ell = covering_annulus_count(n, v0, V0)
    log_harnack = cal.c_harnack * (1 + math.sqrt(K) / 4) / math.log(10)
    chain = oscillation_constant(n, K, v0, V0, cal) * 2 ** (1 - n / 2)
    log_a9 = 4 * ell * log_harnack + math.log10(max(1.0, chain))
    value = 2 * (math.log10(2) + log_a9) + (n - 2) * math.log10(36) + 18 * log_harnack
    if ledger is not None:
        ledger.record(
            "green_constant_log10",
            value,
            "2 log10(2 C_H^(4l) C_osc) + (n-2) log10(36) + 18 log10(C_H)",
            "green-offcenter",
            {"n": n, "K": K, "v0": v0, "V0": V0, "ell": ell},
        )
    return value


# ── Kato constant bounds ──────────────────────────────────────────


def _tail_integral(n: int, alpha: float, v0: float) -> float:
    # area element n·v0·r^{n−1} of a v0-Ahlfors ball
    near, _ = quad(lambda t: t / (1 + t**alpha), 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=200)
    far, _ = quad(
        lambda t: t ** (3 * n - 1) / (1 + t**alpha), 1.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=200
    )
    return 2.0**alpha * n * v0 * (near + far)


def _kato_a_terms(n: int, alpha: float, v0: float, deltas: np.ndarray) -> np.ndarray:
    growth = np.maximum(1.0, deltas ** (3 * n - 2))
    inner = growth / (1 + (deltas / 2) ** alpha) * (n / 8) * v0 * deltas**2
    ball = np.where(deltas <= 1 / 3, v0 * (3 * deltas) ** n, v0 * (3 * deltas) ** (n - alpha))
    middle = 2.0 ** (n - 2) * growth / deltas ** (n - 2) * ball
    return inner + middle + _tail_integral(n, alpha, v0)


def kato_bound_case_a(
    n: int,
    alpha: float,
    beta: float,
    xi: float,
    K: float,
    v0: float,
    cal: Calibration | None = None,
    ledger: ConstantLedger | None = None,
) -> float:
    """C1 >= k∞ for Ric >= −(n−1)K/(1+d(o,·)^α) with α > 3n.

    The supremum over the base point p becomes a supremum over δ = d(o, p)
    on a log grid; past the grid the δ-dependent terms decay like δ^{3n−α}.
    `beta` and `xi` only enter provenance: they are validated as positive and
    recorded with the entry, but the value does not depend on them.
    """
    cal = cal or Calibration()
    if not alpha > 3 * n:
        raise AlphaTooSmall(f"The decay estimate needs alpha > 3n = {3 * n}, got {alpha:g}")
    _positive(beta=beta, xi=xi, v0=v0)
    if K < 0:
        raise BadParameters(f"K must be non-negative, got {K}")

    terms = _kato_a_terms(n, alpha, v0, DELTA_GRID)
    i_max = int(np.argmax(terms))
    if i_max in (0, len(DELTA_GRID) - 1):
        logger.warning(f"Kato bound (a): delta-supremum sits at the grid edge delta={DELTA_GRID[i_max]:g}")
    value = (n - 1) * K * cal.c_green * float(terms[i_max])
    if ledger is not None:
        ledger.record(
            "kato_bound_case_a",
            value,
            "(n-1) K c_green sup_delta [I1 + I2 + I3]",
            "kato-decay-a",
            {
                "n": n,
                "alpha": alpha,
                "beta": beta,
                "xi": xi,
                "K": K,
                "v0": v0,
                "delta_at_sup": float(DELTA_GRID[i_max]),
            },
        )
    return value


def kato_bound_case_b(
    n: int,
    beta: float,
    b0: float,
    v0: float,
    cal: Calibration | None = None,
    ledger: ConstantLedger | None = None,
) -> float:
    """C1 >= k∞ under asymptotically non-negative curvature with budget b0.

    With Ric₋ <= (n−1)·2b0/d(o,·)², the two inner integrals give
    c_ab·2b0·v0·(n/2 + n·6^{n−2}/(n−2)) and the tail gives 8b0v0 + 8n·b0v0.
    """
    cal = cal or Calibration()
    _positive(beta=beta, v0=v0)
    if b0 < 0:
        raise BadParameters(f"b0 must be non-negative, got {b0}")
    inner = cal.c_ab * 2 * b0 * v0 * (n / 2 + n * 6.0 ** (n - 2) / (n - 2))
    tail = 8 * b0 * v0 + 8 * n * b0 * v0
    value = (n - 1) * cal.c_green * (inner + tail)
    if ledger is not None:
        ledger.record(
            "kato_bound_case_b",
            value,
            "(n-1) c_green [C_ab(n,v0,b0) + 8 b0 v0 + 8 n b0 v0]",
            "kato-decay-b",
            {"n": n, "beta": beta, "b0": b0, "v0": v0, "tail_term": tail},
        )
    return value


def _bisect(parameter: str, c1: Callable[[float], float], target: float, steps: int) -> ThresholdWitness:
    """Largest tested value with c1 < target, by geometric bisection of a monotone c1."""
    hi = 1.0
    for _ in range(200):
        if c1(hi) >= target:
            break
        hi *= 2
    lo = hi
    for _ in range(2000):
        if c1(lo) < target:
            break
        lo /= 2
    else:
        raise DominanceFailure(f"No {parameter} > 0 gives C1 below {target:g}")

    bracket = [(lo, hi)]
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        if c1(mid) < target:
            lo = mid
        else:
            hi = mid
        bracket.append((lo, hi))
        logger.debug(f"Threshold {parameter}: bracket [{lo:.10g}, {hi:.10g}]")

    value = c1(lo)
    if not value < target:
        raise DominanceFailure(f"Threshold witness {parameter}={lo:g} gives C1={value:g} >= {target:g}")
    logger.info(f"Threshold {parameter} witness {lo:.6g}: C1={value:.6g} < {target:g}")
    return ThresholdWitness(parameter=parameter, value=lo, c1=value, target=target, bracket=bracket)


def kato_threshold_K(
    n: int,
    alpha: float,
    beta: float,
    xi: float,
    v0: float,
    cal: Calibration | None = None,
    steps: int = BISECT_STEPS,
) -> ThresholdWitness:
    """A curvature size K with C1(K) < 1/(n−2), so the gauge exists."""
    return _bisect(
        "K",
        lambda K: kato_bound_case_a(n, alpha, beta, xi, K, v0, cal),
        1 / (n - 2),
        steps,
    )


def kato_threshold_b0(
    n: int, beta: float, v0: float, cal: Calibration | None = None, steps: int = BISECT_STEPS
) -> ThresholdWitness:
    """A curvature budget b0 with C1(b0) < 1/(n−2)."""
    return _bisect("b0", lambda b0: kato_bound_case_b(n, beta, b0, v0, cal), 1 / (n - 2), steps)


# ── Sobolev constants ─────────────────────────────────────────────


def sobolev_constants(
    n: int,
    beta: float,
    k_infty: float,
    c1: float | None = None,
    ledger: ConstantLedger | None = None,
) -> tuple[float, float, float]:
    """(C, C2, γ): the Sobolev constant at k∞, the one at the bound C1, and the gauge bound γ."""
    if not (n - 2) * k_infty < 1:
        raise NotGaugeable(f"(n-2)k_infty = {(n - 2) * k_infty:g} >= 1")
    gamma = 1 / (1 - (n - 2) * k_infty)
    C = isoperimetric_constant(n, k_infty, beta)
    through_gamma = n * beta ** (1 / n) * gamma ** (-(4 * n - 4) / (n * (n - 2)))
    if abs(C - through_gamma) > IDENTITY_TOL * max(1.0, C):
        raise DominanceFailure(f"Sobolev constant identity broken: {C!r} vs {through_gamma!r}")
    C2 = C if c1 is None else isoperimetric_constant(n, c1, beta)
    if ledger is not None:
        ledger.record(
            "sobolev_constant",
            C,
            "n (1-(n-2)k)^(4(n-1)/(n(n-2))) beta^(1/n)",
            "sobolev-kato",
            {"n": n, "beta": beta, "k_infty": k_infty, "gamma": gamma, "c1": c1, "C2": C2},
            calibrated=False,
        )
    return C, C2, gamma


# ── Dominance over exact values ───────────────────────────────────


def _slope(x: Iterable[float], y: Iterable[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def dominance_check(
    M: ModelManifold,
    cal: Calibration | None = None,
    deltas: Iterable[float] = DOMINANCE_DELTAS,
    radii: Iterable[float] = DOMINANCE_RADII,
    ledger: ConstantLedger | None = None,
) -> DominanceReport:
    """Compare the ledger bounds with the exact pole Green kernel and Kato constant of M."""
    cal = cal or Calibration()
    n = M.n
    deltas = [float(d) for d in deltas]
    radii = [float(r) for r in radii]
    notes: list[str] = []

    kernel = green_pole(M)
    env = curvature_envelope(M)
    V = volume_field(M)
    ratios = V.values / M.radii**n
    v0, V0 = float(ratios.min()), float(ratios.max())
    try:
        beta = asymptotic_volume_ratio(M)
    except WarpbenchError as e:
        beta = v0
        notes.append(f"beta unavailable ({type(e).__name__}); using v0")
    if not 0 < beta < math.inf:
        beta = v0
        notes.append("beta outside (0, inf); using v0")

    # exact G(p, x) is radial only at p = o; max{1, δ^{3n−2}} >= 1 makes δ = 0 the binding case
    unit = Calibration(c_green=1.0)
    c_star = 0.0
    for delta in deltas:
        for r in radii:
            bound = green_bound(n, env.K, v0, V0, delta, r, unit)
            c_star = max(c_star, float(kernel.G(r)) / bound)
    green_ok = cal.c_green >= c_star * (1 - 1e-12)
    notes.append(f"minimal c_green for the Green bound: {c_star:.10g}")

    k_infty = kato_constant(M).k_infty
    c1_a = c1_b = None
    xi = 2.0**n * V0 / v0
    if env.alpha > 3 * n and env.K > 0:
        c1_a = kato_bound_case_a(n, env.alpha, beta, xi, env.K, v0, cal, ledger)
        notes.append(f"minimal c_green for case (a): {k_infty / c1_a * cal.c_green:.10g}")
    else:
        notes.append(f"case (a) not applicable: K={env.K:g}, alpha={env.alpha:g}")
    if env.b0_finite and env.b0 > 0:
        c1_b = kato_bound_case_b(n, beta, env.b0, v0, cal, ledger)
        notes.append(f"minimal c_green for case (b): {k_infty / c1_b * cal.c_green:.10g}")
    else:
        notes.append(f"case (b) not applicable: b0={env.b0:g}")

    r_fit = [r for r in radii if r <= 1]
    exponent_r = _slope(r_fit, [green_bound(n, env.K, v0, V0, 2.0, r, cal) for r in r_fit])
    d_fit = [d for d in deltas if d > 1] or [2.0, 5.0]
    if len(d_fit) < 2:
        d_fit = sorted({*d_fit, 2.0 * d_fit[0]})
    exponent_delta = _slope(d_fit, [green_bound(n, env.K, v0, V0, d, 0.5, cal) for d in d_fit])
    if abs(exponent_r - (2 - n)) > EXPONENT_TOL or abs(exponent_delta - (3 * n - 2)) > EXPONENT_TOL:
        raise DominanceFailure(
            f"Green bound exponents ({exponent_r:.8g}, {exponent_delta:.8g}) "
            f"differ from ({2 - n}, {3 * n - 2})"
        )

    report = DominanceReport(
        c_star=c_star,
        green_ok=green_ok,
        k_infty=k_infty,
        c1_case_a=c1_a,
        c1_case_b=c1_b,
        exponent_r=exponent_r,
        exponent_delta=exponent_delta,
        notes=notes,
    )
    if report.passed:
        logger.info(f"Dominance holds at c_green={cal.c_green:g} (c*={c_star:.6g}, k_infty={k_infty:.6g})")
    else:
        logger.warning(f"Dominance fails at c_green={cal.c_green:g}: {'; '.join(notes)}")
    return report
