"""Scenario orchestration: one handler per command, exit codes from the error hierarchy."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from warpbench.config import (
    build_scenario_manifold,
    param_float,
    param_floats,
    param_int,
    param_mesh,
    sweep_values,
)
from warpbench.errors import (
    ConfigError,
    Divergent,
    InequalityViolated,
    NotGaugeable,
    NumericalFailure,
    WarpbenchError,
)
from warpbench.geometry import (
    asymptotic_volume_ratio,
    bishop_gromov_check,
    curvature_envelope,
    volume_field,
)
from warpbench.ledger import (
    ConstantLedger,
    covering_bound,
    dominance_check,
    green_bound,
    green_constant_log10,
    harnack_constant,
    kato_threshold_K,
    kato_threshold_b0,
    litam_fan_constant,
    meanvalue_constant,
    oscillation_chain_bound,
    sobolev_constants,
)
from warpbench.models import (
    Command,
    ModelManifold,
    RadialField,
    Scenario,
    ScenarioResult,
    WeightedBallProblem,
)
from warpbench.offcenter import FieldCache, ahlfors_check, covering_count_empirical, vc_check
from warpbench.offcenter.volumes import DEFAULT_CENTERS, DEFAULT_RADII, SPREAD_LIMIT, XI_LIMIT
from warpbench.radial import (
    conformal_bakry_emery_check,
    energy_identity_check,
    gauge_solve,
    green_pole,
    kato_constant,
    li_yau_check,
)
from warpbench.reports import write_ledger, write_report
from warpbench.transport import (
    JACOBIAN_STARTS,
    JACOBIAN_STEPS,
    bump_weight,
    constant_weight,
    isoperimetric_check,
    transport_pipeline,
)

logger = logging.getLogger(__name__)

CURVATURE_STRIDE = 64
ISOPERIMETRIC_RADII = (0.5, 1.0, 2.0, 5.0, 10.0)
ENERGY_RADII = (0.1, 1.0, 10.0)
CONFORMAL_RTOL = 1e-5
BISHOP_GROMOV_RTOL = 1e-6


@dataclass
class _Outcome:
    rows: list[dict[str, Any]]
    summary: dict[str, Any]
    passed: bool
    margin: float | None = None
    failures: list[str] = field(default_factory=list)
    ledger_json: str | None = None


def build_weight(M: ModelManifold, section: dict[str, Any]) -> RadialField:
    """The radial weight f of a [weight] section (kind = none | constant | bump)."""
    kind = str(section.get("kind", "none")).lower()
    try:
        if kind == "none":
            return constant_weight(M, 0.0)
        if kind == "constant":
            return constant_weight(M, float(section.get("value", 0.0)))
        if kind == "bump":
            return bump_weight(
                M,
                amplitude=float(section.get("amplitude", 0.1)),
                width=float(section.get("width", 0.5)),
            )
    except ValueError as e:
        raise ConfigError(f"[weight] values must be numbers: {e}") from e
    raise ConfigError(f"Unknown weight kind '{kind}'")


def _v0_V0(M: ModelManifold) -> tuple[float, float]:
    ratios = volume_field(M).values / M.radii**M.n
    return float(ratios.min()), float(ratios.max())


# ── Commands ──────────────────────────────────────────────────────


def _report_curvature(S: Scenario, M: ModelManifold) -> _Outcome:
    env = curvature_envelope(M)
    r = M.radii
    if "radii" in S.params:
        radii = np.asarray(param_floats(S.params, "radii", ()))
        idx = np.clip(np.searchsorted(r, radii), 0, len(r) - 1)
    else:
        idx = np.unique(np.append(np.arange(0, len(r), CURVATURE_STRIDE), len(r) - 1))
    rows = [
        {
            "r": float(r[i]),
            "ric_radial": float(env.ric_radial.values[i]),
            "ric_tangential": float(env.ric_tangential.values[i]),
            "ric_minus": float(env.ric_minus.values[i]),
            "lambda": float(env.lam.values[i]),
            "provenance": "geometry.curvature_envelope [ricci-envelope]",
        }
        for i in idx
    ]

    summary: dict[str, Any] = {"envelope": env.to_dict(), "manifold": M.describe()}
    failures: list[str] = []
    margin = None
    if env.b0_finite:
        r0 = float(r[idx[0]])
        worst = -math.inf
        for i in idx[1:]:
            R = float(r[i])
            bound = math.exp((M.n - 1) * env.b0) * (R / r0) ** M.n
            worst = max(worst, bishop_gromov_check(M, r0, R, env) / bound)
        summary["bishop_gromov_worst_relative"] = worst
        margin = -worst
        if worst > max(S.tol, BISHOP_GROMOV_RTOL):
            failures.append(f"Bishop-Gromov comparison exceeded by {worst:.3e} (relative)")
    return _Outcome(rows, summary, not failures, margin, failures)


def _report_kato(S: Scenario, M: ModelManifold) -> _Outcome:
    kato = kato_constant(M)
    summary: dict[str, Any] = {"kato": kato.to_dict()}
    if not kato.gauge_feasible:
        raise NotGaugeable(f"(n-2)·k_infty = {(M.n - 2) * kato.k_infty:.6g} >= 1")

    gauge = gauge_solve(M, kato)
    min_eig = conformal_bakry_emery_check(M, gauge)
    sup_rm = curvature_envelope(M).ric_minus.sup()
    floor = -max(CONFORMAL_RTOL * sup_rm, S.tol)
    summary["gauge"] = gauge.to_dict()
    summary["conformal_min_eigenvalue"] = min_eig
    summary["conformal_floor"] = floor

    rows = [
        {
            "r": float(x),
            "kato_potential": float(u),
            "phi": float(p),
            "f": float(f),
            "provenance": "radial.gauge_solve [kato-gauge]",
        }
        for x, u, p, f in zip(
            M.radii[::CURVATURE_STRIDE],
            kato.u.values[::CURVATURE_STRIDE],
            gauge.phi.values[::CURVATURE_STRIDE],
            gauge.f.values[::CURVATURE_STRIDE],
        )
    ]
    failures = []
    if min_eig < floor:
        failures.append(f"Conformal Bakry-Emery tensor reaches {min_eig:.3e} < {floor:.3e}")
    if gauge.residual > max(gauge.residual_bound, S.tol):
        failures.append(
            f"Gauge residual {gauge.residual:.3e} above 1e-6·sup Ric_-·sup φ = {gauge.residual_bound:.3e}"
        )
    return _Outcome(rows, summary, not failures, min_eig - floor, failures)


def _verify_isoperimetric(S: Scenario, M: ModelManifold) -> _Outcome:
    radii = param_floats(S.params, "radii", ISOPERIMETRIC_RADII)
    if "radius" in S.params:
        radii = [param_float(S.params, "radius", 1.0)]
    k_infty = kato_constant(M).k_infty
    rows, failures = [], []
    for R in radii:
        ratio, threshold, passed = isoperimetric_check(M, R, k_infty)
        rows.append(
            {
                "R": R,
                "ratio": ratio,
                "threshold": threshold,
                "ratio_over_threshold": ratio / threshold,
                "passed": passed,
                "provenance": "transport.isoperimetric_check [isoperimetric-kato]",
            }
        )
        if not passed:
            failures.append(f"Isoperimetric ratio {ratio:.10g} below {threshold:.10g} at R={R:g}")
    margin = min(row["ratio_over_threshold"] for row in rows) - 1
    return _Outcome(rows, {"k_infty": k_infty, "radii": len(radii)}, not failures, margin, failures)


def _verify_abp(S: Scenario, M: ModelManifold) -> _Outcome:
    try:
        kato = kato_constant(M)
    except Divergent as e:
        raise NotGaugeable(f"k_infty = inf: {e}") from e
    if not kato.gauge_feasible:
        raise NotGaugeable(f"(n-2)·k_infty = {(M.n - 2) * kato.k_infty:.6g} >= 1")

    R = param_float(S.params, "radius", 1.0)
    horizon = param_float(S.params, "horizon", None)
    count = param_int(S.params, "start_radii", JACOBIAN_STARTS)
    steps = param_int(S.params, "time_steps", JACOBIAN_STEPS)
    f = build_weight(M, S.weight)
    P = WeightedBallProblem(M, R, f, RadialField.constant(M.radii, 1.0, "h"))
    T = transport_pipeline(P, count=count, steps=steps, horizon=horizon)

    rows = [
        {**s.to_dict(), "provenance": "transport.transport_jacobian [jacobian-bound]"}
        for s in T.jacobian_samples
    ]
    checked = [s for s in T.jacobian_samples if s.hypothesis_holds and s.bound > 0]
    margin = min((1 - s.det_p / s.bound for s in checked), default=None)
    summary = {"kato": kato.to_dict(), "transport": T.to_dict(), "checked_samples": len(checked)}
    if checked:
        summary["max_equality_gap"] = max(abs(s.det_p / s.bound - 1) for s in checked)

    failures = []
    if T.sobolev_lhs is not None and T.sobolev_rhs is not None:
        sobolev_margin = T.sobolev_rhs / T.sobolev_lhs - 1
        summary["sobolev_margin"] = sobolev_margin
        if sobolev_margin < -S.tol:
            failures.append(f"Weighted Sobolev inequality fails: {T.sobolev_lhs:.12g} > {T.sobolev_rhs:.12g}")
        margin = sobolev_margin if margin is None else min(margin, sobolev_margin)
    return _Outcome(rows, summary, not failures, margin, failures)


def _verify_green_bounds(S: Scenario, M: ModelManifold) -> _Outcome:
    n, cal = M.n, S.calibration
    kernel = green_pole(M)
    summary: dict[str, Any] = {"green": kernel.to_dict(), "li_yau_constant": li_yau_check(M, kernel)}

    energy = []
    for r in param_floats(S.params, "energy_radii", ENERGY_RADII):
        if r <= M.r_max:
            value, bound = energy_identity_check(M, r, kernel)
            energy.append({"r": r, "energy": value, "four_G": bound})
    summary["energy"] = energy

    env = curvature_envelope(M)
    K, alpha = env.K, env.alpha
    v0, V0 = _v0_V0(M)
    beta = asymptotic_volume_ratio(M)
    if not 0 < beta < math.inf:
        beta = v0
    xi = 2.0**n * V0 / v0
    deltas = param_floats(S.params, "deltas", (0.0, 1.0, 2.0, 5.0))
    radii = [r for r in param_floats(S.params, "sample_radii", np.linspace(0.1, 1.0, 10)) if r <= 1]

    ledger = ConstantLedger(cal)
    covering_bound(v0, V0, 0.25, 2.0, n, ledger)
    ledger.record(
        "harnack_constant",
        harnack_constant(n, K, 0.25, cal),
        "exp(c_harnack (1 + sqrt(theta) R))",
        "harnack",
        {"n": n, "theta": K, "R": 0.25},
    )
    ledger.record(
        "meanvalue_constant",
        meanvalue_constant(n, 9 * K, 18 * (n - 1) * K, 1 / 16, cal),
        "c exp(c (R sqrt(theta) + R^2 lambda))",
        "mean-value",
        {"n": n, "theta": 9 * K, "lambda": 18 * (n - 1) * K, "R": 1 / 16},
    )
    if K > 0:
        ledger.record(
            "litam_fan_constant",
            litam_fan_constant(K, n, xi, cal),
            "K^(-n/2) exp((1+xi) exp(c (1+sqrt(K))))",
            "li-tam-fan",
            {"K": K, "n": n, "xi": xi},
        )
    for delta in deltas:
        oscillation_chain_bound(n, K, v0, V0, delta, 0.5, cal, ledger)
        for r in radii:
            green_bound(n, K, v0, V0, delta, r, cal, ledger)
    green_constant_log10(n, K, v0, V0, cal, ledger)

    report = dominance_check(M, cal, deltas, radii, ledger)
    summary["dominance"] = report.to_dict()

    c1_values = [c for c in (report.c1_case_a, report.c1_case_b) if c is not None]
    if (n - 2) * report.k_infty < 1:
        usable = [c for c in c1_values if (n - 2) * c < 1]
        sobolev_constants(n, beta, report.k_infty, min(usable) if usable else None, ledger)

    witnesses = {}
    if alpha > 3 * n:
        witnesses["K"] = kato_threshold_K(n, alpha, beta, xi, v0, cal)
    witnesses["b0"] = kato_threshold_b0(n, beta, v0, cal)
    summary["thresholds"] = {
        name: {**w.to_dict(), "bracket": [list(b) for b in w.bracket]} for name, w in witnesses.items()
    }

    rows = [
        {
            "name": e.name,
            "value": e.value,
            "formula": e.formula,
            "anchor": e.anchor,
            "inputs": e.inputs,
            "provenance": f"ledger.{e.name} [{e.anchor}]",
        }
        for e in ledger.entries
    ]
    failures = [] if report.passed else [f"Ledger bounds do not dominate at {cal.to_dict()}"]
    margin = cal.c_green / report.c_star - 1 if report.c_star > 0 else None
    return _Outcome(rows, summary, report.passed, margin, failures, ledger.to_json())


def _verify_offcenter(S: Scenario, M: ModelManifold) -> _Outcome:
    n_r, n_psi = param_mesh(S.params)
    cache = FieldCache(S.params["cache"]) if "cache" in S.params else None
    try:
        ahl = ahlfors_check(
            M,
            param_floats(S.params, "centers", DEFAULT_CENTERS),
            param_floats(S.params, "ball_radii", DEFAULT_RADII),
            n_r,
            n_psi,
            param_float(S.params, "spread_limit", SPREAD_LIMIT),
            cache,
        )
        vc = vc_check(
            M,
            param_floats(S.params, "vc_radii", DEFAULT_RADII),
            n_r,
            n_psi,
            param_float(S.params, "xi", XI_LIMIT),
            cache,
        )
        summary: dict[str, Any] = {"ahlfors": ahl.to_dict(), "vc": vc.to_dict()}
        if "covering_radius" in S.params:
            summary["covering_count"] = covering_count_empirical(
                M,
                param_float(S.params, "covering_radius", 1.0),
                param_float(S.params, "Q", 2.0),
                param_float(S.params, "alpha", 0.25),
                ahlfors=ahl,
                cache=cache,
            )
    finally:
        if cache:
            cache.close()

    rows = [
        {
            "quantity": "ball_ratio",
            "center": c,
            "radius": r,
            "value": q,
            "provenance": "offcenter.ball_volume [ahlfors]",
        }
        for c, r, q in ahl.samples
    ]
    rows.extend(
        {
            "quantity": "vc_ratio",
            "center": r,
            "radius": r / 2,
            "value": q,
            "provenance": "offcenter.vc_check [volume-comparison]",
        }
        for r, q in vc.ratios
    )
    failures = []
    if not ahl.ahlfors_ok:
        failures.append(f"Ahlfors spread {ahl.spread:.4g} flagged")
    if not vc.bounded:
        failures.append(f"Condition (VC) flagged: xi_emp={vc.xi_emp:.4g}")
    margin = min(ahl.spread_limit / ahl.spread - 1, param_float(S.params, "xi", XI_LIMIT) / vc.xi_emp - 1)
    return _Outcome(rows, summary, not failures, margin, failures)


_HANDLERS: dict[Command, Callable[[Scenario, ModelManifold], _Outcome]] = {
    Command.REPORT_CURVATURE: _report_curvature,
    Command.REPORT_KATO: _report_kato,
    Command.VERIFY_ISOPERIMETRIC: _verify_isoperimetric,
    Command.VERIFY_ABP: _verify_abp,
    Command.VERIFY_GREEN_BOUNDS: _verify_green_bounds,
    Command.VERIFY_OFFCENTER: _verify_offcenter,
}


# ── Entry points ──────────────────────────────────────────────────


def run_scenario(S: Scenario) -> ScenarioResult:
    """Run one scenario; asserted inequalities decide the exit code, errors map through their class."""
    if S.command is Command.SWEEP:
        result = sweep(S)
    else:
        logger.info(f"Running scenario '{S.name}': {S.command.value}")
        ledger_json = None
        try:
            M = build_scenario_manifold(S)
            outcome = _HANDLERS[S.command](S, M)
        except WarpbenchError as e:
            logger.error(f"{S.name}: {type(e).__name__}: {e}")
            result = ScenarioResult(
                scenario=S.name,
                command=S.command,
                exit_code=e.exit_code,
                error={"type": type(e).__name__, "message": str(e)},
            )
        except (ArithmeticError, np.linalg.LinAlgError) as e:
            logger.error(f"{S.name}: numerical failure: {e}")
            result = ScenarioResult(
                scenario=S.name,
                command=S.command,
                exit_code=NumericalFailure.exit_code,
                error={"type": type(e).__name__, "message": str(e)},
            )
        else:
            ledger_json = outcome.ledger_json
            summary = {**outcome.summary, "margin": outcome.margin, "tol": S.tol}
            summary["calibration"] = S.calibration.to_dict()
            error = None
            if not outcome.passed:
                error = {"type": InequalityViolated.__name__, "message": "; ".join(outcome.failures)}
                logger.warning(f"{S.name}: {error['message']}")
            result = ScenarioResult(
                scenario=S.name,
                command=S.command,
                exit_code=0 if outcome.passed else InequalityViolated.exit_code,
                rows=outcome.rows,
                summary=summary,
                error=error,
            )
        if S.out_dir and ledger_json:
            write_ledger(ledger_json, S.name, S.out_dir)

    if S.out_dir:
        write_report(result, S.out_dir)
    return result


def _override(S: Scenario, key: str, value: float, index: int) -> Scenario:
    """Copy of S with `key` (a [scenario] key or section.key) set to value."""
    section, _, name = key.rpartition(".")
    text = repr(float(value))
    common = {"name": f"{S.name}-{index:03d}", "out_dir": None, "parallel": 1}
    if section in ("", "scenario"):
        return replace(S, params={**S.params, name: text}, **common)
    if section == "manifold":
        return replace(S, manifold={**S.manifold, name: text}, **common)
    if section == "tail":
        return replace(S, tail={**S.tail, name: float(value)}, **common)
    if section == "weight":
        return replace(S, weight={**S.weight, name: text}, **common)
    if section == "calibration":
        return replace(S, calibration=S.calibration.with_overrides(**{name: float(value)}), **common)
    raise ConfigError(f"Cannot sweep {key!r}: unknown section {section!r}")


def _sweep_point(S: Scenario) -> ScenarioResult:
    return run_scenario(S)


def sweep(S: Scenario) -> ScenarioResult:
    """Run `sweep_of` once per grid value of `sweep_param`; one row per point, in grid order."""
    target = Command(S.params["sweep_of"])
    key = S.params["sweep_param"]
    values = sweep_values(S.params)
    base = replace(S, command=target)
    points = [_override(base, key, v, i) for i, v in enumerate(values)]
    logger.info(f"Sweep '{S.name}': {target.value} over {key} ({len(points)} points, {S.parallel} workers)")

    if S.parallel > 1:
        with ProcessPoolExecutor(max_workers=S.parallel) as pool:
            results = list(pool.map(_sweep_point, points))
    else:
        results = [_sweep_point(p) for p in points]

    rows = []
    for value, res in zip(values, results):
        rows.append(
            {
                key: value,
                "exit_code": res.exit_code,
                "passed": res.passed,
                "margin": res.summary.get("margin"),
                "error": res.error["type"] if res.error else "",
                "provenance": f"runner.sweep [{target.value}]",
            }
        )
    margins = [row["margin"] for row in rows if row["margin"] is not None]
    passed = sum(res.passed for res in results)
    worst_code = max((res.exit_code for res in results), default=0)
    summary = {
        "sweep_of": target.value,
        "sweep_param": key,
        "points": len(results),
        "passed": passed,
        "failed": len(results) - passed,
        "worst_margin": min(margins) if margins else None,
    }
    return ScenarioResult(
        scenario=S.name,
        command=Command.SWEEP,
        exit_code=worst_code,
        rows=rows,
        summary=summary,
        error=None if worst_code == 0 else {"type": "SweepFailed", "message": f"{len(results) - passed} point(s) failed"},
    )
