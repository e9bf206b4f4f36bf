"""Exception hierarchy for warpbench.

Every error carries the process exit code the scenario runner reports for it.
Library code raises; only the runner translates errors into exit codes.
"""

from __future__ import annotations


class WarpbenchError(Exception):
    """Root of all warpbench errors."""

    exit_code: int = 1


# ── Exit 4: invalid input or configuration ────────────────────────


class InvalidInput(WarpbenchError, ValueError):
    exit_code = 4


class DimensionTooLow(InvalidInput):
    pass


class PoleConditionViolated(InvalidInput):
    pass


class NonPositiveWarp(InvalidInput):
    pass


class BadParameters(InvalidInput):
    pass


class ConfigError(InvalidInput):
    pass


class MeshTooCoarse(InvalidInput):
    pass


# ── Exit 2: a hypothesis of the checked statement does not hold ───


class HypothesisNotMet(WarpbenchError):
    exit_code = 2


class Parabolic(HypothesisNotMet):
    pass


class Divergent(HypothesisNotMet):
    pass


class NotGaugeable(HypothesisNotMet):
    pass


class EnvelopeDivergent(HypothesisNotMet):
    pass


class CurvatureHypothesisFails(HypothesisNotMet):
    pass


class AVRUndefined(HypothesisNotMet):
    pass


class AlphaTooSmall(HypothesisNotMet):
    pass


class KZero(HypothesisNotMet):
    pass


class RadiusTooLarge(HypothesisNotMet):
    pass


class HorizonTooSmall(HypothesisNotMet):
    pass


class OutsideU(HypothesisNotMet):
    pass


# ── Exit 3: an asserted inequality failed ─────────────────────────


class InequalityViolated(WarpbenchError):
    exit_code = 3


class DominanceFailure(InequalityViolated):
    pass


# ── Exit 1: numerical failure ─────────────────────────────────────


class NumericalFailure(WarpbenchError):
    exit_code = 1


class PoleEvaluation(NumericalFailure):
    pass


class OutOfGrid(NumericalFailure):
    pass


class TailUnresolved(NumericalFailure):
    pass


class FitFailed(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class DegenerateH(NumericalFailure):
    pass


class NotNormalized(NumericalFailure):
    pass


class BallExitsGrid(NumericalFailure):
    pass


EXIT_CODES = {
    0: "pass",
    1: "numerical failure",
    2: "hypothesis not met",
    3: "inequality violated",
    4: "configuration error",
}
