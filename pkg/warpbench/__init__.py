"""
warpbench: numerical workbench for rotationally symmetric model manifolds.

Usage:
    from warpbench import build_manifold, kato_constant
    from warpbench.profiles import SmoothedCone

    M = build_manifold(3, SmoothedCone(slope=0.5, smoothing=1.0))
    print(kato_constant(M).k_infty)
"""

from warpbench.geometry import build_manifold, curvature_envelope
from warpbench.ledger import ConstantLedger, dominance_check
from warpbench.models import Calibration, Command, GridSpec, ModelManifold, Scenario, ScenarioResult
from warpbench.radial import gauge_solve, green_pole, kato_constant
from warpbench.runner import run_scenario

__version__ = "0.1.0"

__all__ = [
    "build_manifold",
    "curvature_envelope",
    "green_pole",
    "kato_constant",
    "gauge_solve",
    "ConstantLedger",
    "dominance_check",
    "run_scenario",
    "Calibration",
    "Command",
    "GridSpec",
    "ModelManifold",
    "Scenario",
    "ScenarioResult",
]
