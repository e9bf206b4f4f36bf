"""Tests for warping profiles and the profile factory."""

import math
import os
import sys
import tempfile
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from warpbench.errors import BadParameters, ConfigError, FitFailed
from warpbench.models import ProfileKind
from warpbench.profiles import (
    Euclidean,
    Hyperbolic,
    Perturbed,
    Scaled,
    SmoothedCone,
    Tabulated,
    build_profile,
    fit_power_tail,
)


class TestAnalyticProfiles(unittest.TestCase):
    def test_euclidean(self):
        p = Euclidean()
        self.assertEqual(p.w(2.0), 2.0)
        self.assertEqual(float(p.dw(2.0)), 1.0)
        self.assertEqual(p.d3w0, 0.0)
        self.assertEqual((p.tail_exponent, p.tail_coefficient), (1.0, 1.0))

    def test_hyperbolic(self):
        p = Hyperbolic(kappa=2.0)
        self.assertAlmostEqual(float(p.w(1.0)), math.sinh(2.0) / 2.0, places=12)
        self.assertAlmostEqual(p.d3w0, 4.0)
        self.assertTrue(math.isinf(p.tail_exponent))
        self.assertAlmostEqual(p.max_radius(3), 650.0 / 4.0)

    def test_cone_pole_and_tail(self):
        p = SmoothedCone(slope=0.5, smoothing=1.0)
        self.assertAlmostEqual(float(p.w(0.0)), 0.0, places=15)
        self.assertAlmostEqual(float(p.dw(0.0)), 1.0, places=15)
        self.assertAlmostEqual(float(p.dw(50.0)), 0.5, places=12)
        self.assertAlmostEqual(p.d3w0, -1.0)
        r = np.linspace(0.0, 10.0, 101)
        self.assertTrue(np.all(p.d2w(r) <= 0))

    def test_cone_one_minus_dw2_matches_direct(self):
        p = SmoothedCone(slope=0.3, smoothing=0.7)
        r = np.array([0.1, 0.5, 1.0, 3.0])
        np.testing.assert_allclose(p.one_minus_dw2(r), 1 - p.dw(r) ** 2, rtol=1e-12)

    def test_perturbed_derivatives(self):
        p = Perturbed(Euclidean(), amplitude=0.1, width=1.0)
        r = np.array([0.3, 0.8, 1.5])
        h = 1e-6
        np.testing.assert_allclose(p.dw(r), (p.w(r + h) - p.w(r - h)) / (2 * h), rtol=1e-8)
        np.testing.assert_allclose(p.d2w(r), (p.dw(r + h) - p.dw(r - h)) / (2 * h), rtol=1e-6)
        self.assertAlmostEqual(p.d3w0, 0.6)

    def test_scaled_hyperbolic_is_hyperbolic(self):
        s = Scaled(Hyperbolic(kappa=1.0), 2.0)
        h = Hyperbolic(kappa=0.5)
        r = np.array([0.5, 1.0, 4.0])
        np.testing.assert_allclose(s.w(r), h.w(r), rtol=1e-12)
        np.testing.assert_allclose(s.d2w(r), h.d2w(r), rtol=1e-12)
        self.assertAlmostEqual(s.d3w0, h.d3w0)

    def test_scaled_tail_coefficient(self):
        s = Scaled(SmoothedCone(slope=0.5), 3.0)
        self.assertEqual(s.tail_exponent, 1.0)
        self.assertAlmostEqual(s.tail_coefficient, 0.5)

    def test_invalid_parameters(self):
        with self.assertRaises(BadParameters):
            SmoothedCone(slope=0.0)
        with self.assertRaises(BadParameters):
            SmoothedCone(smoothing=-1.0)
        with self.assertRaises(BadParameters):
            Hyperbolic(kappa=-1.0)
        with self.assertRaises(BadParameters):
            Scaled(Euclidean(), 0.0)

    def test_with_tail_returns_copy(self):
        p = Euclidean()
        q = p.with_tail(p=0.5)
        self.assertEqual(q.tail_exponent, 0.5)
        self.assertEqual(p.tail_exponent, 1.0)

    def test_fingerprint(self):
        a = SmoothedCone(slope=0.5).fingerprint()
        self.assertEqual(a, SmoothedCone(slope=0.5).fingerprint())
        self.assertNotEqual(a, SmoothedCone(slope=0.6).fingerprint())
        self.assertEqual(len(a), 16)


class TestTabulated(unittest.TestCase):
    def test_fit_power_tail(self):
        r = np.geomspace(1.0, 100.0, 50)
        p, c = fit_power_tail(r, 3.0 * r**2)
        self.assertAlmostEqual(p, 2.0, places=10)
        self.assertAlmostEqual(c, 3.0, places=8)

    def test_fit_needs_samples(self):
        with self.assertRaises(FitFailed):
            fit_power_tail(np.array([1.0, 2.0, 100.0]), np.array([1.0, 2.0, 100.0]))

    def test_from_csv_and_tail(self):
        r = np.linspace(0.0, 10.0, 101)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "w.csv")
            with open(path, "w") as fh:
                fh.write("r,w\n")
                for x in r:
                    fh.write(f"{float(x)!r},{float(x)!r}\n")
            p = Tabulated.from_csv(path)
        self.assertAlmostEqual(p.tail_exponent, 1.0, places=8)
        self.assertAlmostEqual(float(p.w(5.05)), 5.05, places=10)
        self.assertAlmostEqual(float(p.w(20.0)), 20.0, places=6)
        self.assertAlmostEqual(float(p.dw(20.0)), 1.0, places=6)
        self.assertIsNone(p.d3w0)
        self.assertEqual(p.kind, ProfileKind.TABULATED)

    def test_rejects_unsorted(self):
        r = np.linspace(0.0, 1.0, 10)[::-1]
        with self.assertRaises(BadParameters):
            Tabulated(r, r)


class TestBuildProfile(unittest.TestCase):
    def test_kinds(self):
        self.assertIsInstance(build_profile({"kind": "euclidean"}), Euclidean)
        cone = build_profile({"kind": "cone", "slope": "0.25", "smoothing": "2"})
        self.assertIsInstance(cone, SmoothedCone)
        self.assertEqual((cone.slope, cone.smoothing), (0.25, 2.0))
        pert = build_profile({"kind": "perturbed", "base": "cone", "amplitude": "0.05"})
        self.assertIsInstance(pert, Perturbed)
        self.assertIsInstance(pert.base, SmoothedCone)

    def test_tail_override(self):
        p = build_profile({"kind": "euclidean"}, {"p": 0.5})
        self.assertEqual(p.tail_exponent, 0.5)
        self.assertEqual(p.tail_coefficient, 1.0)

    def test_errors(self):
        with self.assertRaises(ConfigError):
            build_profile({"kind": "torus"})
        with self.assertRaises(ConfigError):
            build_profile({"kind": "tabulated"})
        with self.assertRaises(ConfigError):
            build_profile({"kind": "cone", "slope": "steep"})
        with self.assertRaises(ConfigError):
            build_profile({"kind": "perturbed", "base": "perturbed"})


if __name__ == "__main__":
    unittest.main()
