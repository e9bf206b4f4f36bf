"""End-to-end tests of the warpbench CLI on small scenario files."""

import csv
import json
import os
import sys
import tempfile
import textwrap
import unittest

from click.testing import CliRunner

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from warpbench.cli import cli

EUCLIDEAN = """
[manifold]
n = 3
kind = euclidean
"""

CONE = """
[manifold]
n = 3
kind = cone
slope = 0.5
smoothing = 1.0
"""

HYPERBOLIC = """
[manifold]
n = 3
kind = hyperbolic
"""


class TestCLI(unittest.TestCase):
    def setUp(self):
        self.runner = CliRunner()
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, "out")

    def tearDown(self):
        self.tmp.cleanup()

    def scenario(self, text: str, name: str = "case") -> str:
        path = os.path.join(self.tmp.name, f"{name}.ini")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(textwrap.dedent(text))
        return path

    def invoke(self, command: str, path: str, *extra: str):
        return self.runner.invoke(cli, [command, "--config", path, "--out", self.out, *extra])

    def report(self, name: str) -> dict:
        with open(os.path.join(self.out, f"{name}.json"), encoding="utf-8") as fh:
            return json.load(fh)

    def rows(self, name: str) -> list[dict]:
        with open(os.path.join(self.out, f"{name}.csv"), newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))

    def test_help(self):
        result = self.runner.invoke(cli, ["--help"])
        self.assertEqual(result.exit_code, 0)
        self.assertIn("verify-isoperimetric", result.output)
        self.assertIn("sweep", result.output)

    def test_report_curvature(self):
        result = self.invoke("report-curvature", self.scenario(EUCLIDEAN, "flat"))
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("PASS", result.output)
        report = self.report("flat")
        self.assertEqual(report["schema"], 1)
        self.assertEqual(report["command"], "report-curvature")
        self.assertEqual(report["summary"]["envelope"]["K"], 0.0)
        rows = self.rows("flat")
        self.assertTrue(rows)
        self.assertEqual(list(rows[0])[-1], "provenance")
        self.assertEqual(float(rows[0]["ric_minus"]), 0.0)

    def test_report_kato(self):
        result = self.invoke("report-kato", self.scenario(EUCLIDEAN, "flat"))
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(self.report("flat")["summary"]["kato"]["k_infty"], 0.0)

    def test_isoperimetric_cone(self):
        result = self.invoke("verify-isoperimetric", self.scenario(CONE, "cone"))
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.rows("cone")
        self.assertEqual(len(rows), 5)
        for row in rows:
            self.assertEqual(row["passed"], "true")
            self.assertGreater(float(row["ratio_over_threshold"]), 1.0)

    def test_isoperimetric_hyperbolic(self):
        result = self.invoke("verify-isoperimetric", self.scenario(HYPERBOLIC, "hyp"))
        self.assertEqual(result.exit_code, 2, result.output)
        self.assertEqual(self.report("hyp")["error"]["type"], "Divergent")

    def test_abp_hyperbolic(self):
        result = self.invoke("verify-abp", self.scenario(HYPERBOLIC, "hyp"))
        self.assertEqual(result.exit_code, 2, result.output)
        self.assertEqual(self.report("hyp")["error"]["type"], "NotGaugeable")

    def test_low_dimension(self):
        result = self.invoke("report-curvature", self.scenario("[manifold]\nn = 2\n", "flat2"))
        self.assertEqual(result.exit_code, 4, result.output)
        self.assertEqual(self.report("flat2")["error"]["type"], "DimensionTooLow")

    def test_unknown_section(self):
        path = self.scenario(EUCLIDEAN + "[extras]\nx = 1\n")
        result = self.invoke("report-curvature", path)
        self.assertEqual(result.exit_code, 4)
        self.assertIn("Configuration error", result.output)

    def test_bad_tolerance(self):
        result = self.invoke("report-curvature", self.scenario(EUCLIDEAN), "--tol", "-1")
        self.assertEqual(result.exit_code, 4)

    def test_bad_calibration_option(self):
        result = self.invoke("verify-green-bounds", self.scenario(EUCLIDEAN), "--calibration", "c_green")
        self.assertEqual(result.exit_code, 2)

    def test_missing_config(self):
        result = self.invoke("report-curvature", os.path.join(self.tmp.name, "absent.ini"))
        self.assertEqual(result.exit_code, 2)

    def test_green_bounds_dominate(self):
        path = self.scenario(EUCLIDEAN, "green")
        result = self.invoke("verify-green-bounds", path, "--calibration", "c_green=1")
        self.assertEqual(result.exit_code, 0, result.output)
        with open(os.path.join(self.out, "green.ledger.json"), encoding="utf-8") as fh:
            entries = json.load(fh)
        anchors = {e["anchor"] for e in entries}
        self.assertIn("covering", anchors)
        self.assertIn("green-offcenter", anchors)
        summary = self.report("green")["summary"]
        self.assertTrue(summary["dominance"]["passed"])
        self.assertIn("b0", summary["thresholds"])

    def test_green_bounds_undercalibrated(self):
        path = self.scenario(EUCLIDEAN, "green")
        result = self.invoke("verify-green-bounds", path, "--calibration", "c_green=0.01")
        self.assertEqual(result.exit_code, 3, result.output)
        self.assertEqual(self.report("green")["error"]["type"], "InequalityViolated")

    def test_sweep(self):
        path = self.scenario(
            CONE
            + textwrap.dedent(
                """
            [scenario]
            sweep_of = verify-isoperimetric
            sweep_param = manifold.slope
            sweep_values = 0.5, 0.8
            radii = 1, 2
            """
            ),
            "slopes",
        )
        result = self.invoke("sweep", path)
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.rows("slopes")
        self.assertEqual([float(r["manifold.slope"]) for r in rows], [0.5, 0.8])
        self.assertTrue(all(r["exit_code"] == "0" for r in rows))
        self.assertEqual(self.report("slopes")["summary"]["points"], 2)

    def test_offcenter(self):
        path = self.scenario(
            EUCLIDEAN
            + textwrap.dedent(
                """
            [scenario]
            centers = 0, 2
            ball_radii = 0.5, 1
            vc_radii = 1, 2
            mesh = 256x128
            """
            ),
            "balls",
        )
        result = self.invoke("verify-offcenter", path)
        self.assertEqual(result.exit_code, 0, result.output)
        quantities = {r["quantity"] for r in self.rows("balls")}
        self.assertEqual(quantities, {"ball_ratio", "vc_ratio"})


if __name__ == "__main__":
    unittest.main()
