"""Tests for scenario orchestration and exit-code mapping."""

import os
import sys
import tempfile
import unittest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from warpbench.errors import ConfigError
from warpbench.geometry import build_manifold
from warpbench.models import Calibration, Command, Scenario
from warpbench.profiles import Euclidean
from warpbench.runner import _override, build_weight, run_scenario


def _scenario(command, **kwargs):
    defaults = dict(name="case", command=command, manifold={"n": "3", "kind": "euclidean"})
    defaults.update(kwargs)
    return Scenario(**defaults)


class TestRunScenario(unittest.TestCase):
    def test_isoperimetric_equality(self):
        result = run_scenario(_scenario(Command.VERIFY_ISOPERIMETRIC, params={"radii": "1, 2"}))
        self.assertEqual(result.exit_code, 0)
        self.assertTrue(result.passed)
        self.assertEqual(len(result.rows), 2)
        self.assertAlmostEqual(result.summary["margin"], 0.0, places=8)
        self.assertEqual(result.summary["calibration"]["c_green"], 1.0)

    def test_hypothesis_error(self):
        S = _scenario(Command.REPORT_KATO, manifold={"n": "3", "kind": "hyperbolic"})
        result = run_scenario(S)
        self.assertEqual(result.exit_code, 2)
        self.assertEqual(result.error["type"], "Divergent")
        self.assertEqual(result.rows, [])

    def test_input_error(self):
        result = run_scenario(_scenario(Command.REPORT_CURVATURE, manifold={"n": "3", "kind": "torus"}))
        self.assertEqual(result.exit_code, 4)
        self.assertEqual(result.error["type"], "ConfigError")

    def test_inequality_violated(self):
        S = _scenario(
            Command.VERIFY_GREEN_BOUNDS,
            calibration=Calibration(c_green=0.01),
            params={"deltas": "0, 2", "sample_radii": "0.5, 1"},
        )
        result = run_scenario(S)
        self.assertEqual(result.exit_code, 3)
        self.assertEqual(result.error["type"], "InequalityViolated")
        self.assertTrue(result.rows)

    def test_reports_written(self):
        with tempfile.TemporaryDirectory() as tmp:
            run_scenario(_scenario(Command.REPORT_CURVATURE, out_dir=tmp))
            self.assertTrue(os.path.exists(os.path.join(tmp, "case.csv")))
            self.assertTrue(os.path.exists(os.path.join(tmp, "case.json")))


class TestSweep(unittest.TestCase):
    def test_rows_in_grid_order(self):
        S = _scenario(
            Command.SWEEP,
            manifold={"n": "3", "kind": "cone", "slope": "0.5"},
            params={
                "sweep_of": "verify-isoperimetric",
                "sweep_param": "manifold.slope",
                "sweep_values": "0.8, 0.5",
                "radii": "1",
            },
        )
        result = run_scenario(S)
        self.assertEqual(result.exit_code, 0)
        self.assertEqual([row["manifold.slope"] for row in result.rows], [0.8, 0.5])
        self.assertEqual(result.summary["passed"], 2)
        self.assertGreaterEqual(result.summary["worst_margin"], 0.0)

    def test_worst_exit_code(self):
        S = _scenario(
            Command.SWEEP,
            params={
                "sweep_of": "verify-green-bounds",
                "sweep_param": "calibration.c_green",
                "sweep_values": "1, 0.01",
                "deltas": "0, 2",
                "sample_radii": "0.5, 1",
            },
        )
        result = run_scenario(S)
        self.assertEqual(result.exit_code, 3)
        self.assertEqual([row["exit_code"] for row in result.rows], [0, 3])
        self.assertEqual(result.error["type"], "SweepFailed")

    def test_override_sections(self):
        S = _scenario(Command.VERIFY_ABP, weight={"kind": "bump"})
        self.assertEqual(_override(S, "radius", 2.0, 0).params["radius"], "2.0")
        self.assertEqual(_override(S, "weight.amplitude", 0.2, 1).weight["amplitude"], "0.2")
        self.assertEqual(_override(S, "tail.p", 1.0, 2).tail, {"p": 1.0})
        self.assertEqual(_override(S, "calibration.c_ab", 3.0, 3).calibration.c_ab, 3.0)
        self.assertEqual(_override(S, "radius", 2.0, 7).name, "case-007")
        with self.assertRaises(ConfigError):
            _override(S, "mesh.size", 1.0, 0)


class TestBuildWeight(unittest.TestCase):
    def test_kinds(self):
        M = build_manifold(3, Euclidean())
        self.assertEqual(build_weight(M, {}).sup(), 0.0)
        self.assertEqual(build_weight(M, {"kind": "constant", "value": "0.5"}).inf(), 0.5)
        bump = build_weight(M, {"kind": "bump", "amplitude": "0.2", "width": "1"})
        self.assertAlmostEqual(bump.inf(), -0.2, places=9)
        with self.assertRaises(ConfigError):
            build_weight(M, {"kind": "bump", "amplitude": "large"})
        with self.assertRaises(ConfigError):
            build_weight(M, {"kind": "ramp"})


if __name__ == "__main__":
    unittest.main()
