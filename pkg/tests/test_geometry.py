"""Tests for manifold construction, curvature, volumes and the curvature envelope."""

import math
import os
import sys
import unittest

import numpy as np
from scipy.integrate import trapezoid

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from warpbench.errors import (
    DimensionTooLow,
    EnvelopeDivergent,
    NonPositiveWarp,
    OutOfGrid,
    PoleConditionViolated,
    PoleEvaluation,
    TailUnresolved,
)
from warpbench.geometry import (
    ALPHA_STEP,
    asymptotic_volume_ratio,
    bishop_gromov_check,
    build_manifold,
    curvature_envelope,
    ric_minus,
    ricci_eigenvalues,
    sphere_area,
    volume_and_area,
    volume_field,
)
from warpbench.models import GridSpec, ProfileKind
from warpbench.profiles import Euclidean, Hyperbolic, Perturbed, SmoothedCone, Tabulated
from warpbench.profiles.base import WarpingProfile


class _Sine(WarpingProfile):
    """w = sin r: a round sphere, which closes up at r = π."""

    kind = ProfileKind.EUCLIDEAN

    def __init__(self, shift: float = 0.0):
        self.shift = shift
        super().__init__(tail_exponent=0.0, tail_coefficient=1.0)

    def w(self, r):
        return np.sin(np.asarray(r, dtype=np.float64)) + self.shift

    def dw(self, r):
        return np.cos(np.asarray(r, dtype=np.float64))

    def d2w(self, r):
        return -np.sin(np.asarray(r, dtype=np.float64))

    def params(self):
        return {"shift": self.shift}


class TestBuildManifold(unittest.TestCase):
    def test_dimension(self):
        with self.assertRaises(DimensionTooLow):
            build_manifold(2, Euclidean())

    def test_pole_condition(self):
        with self.assertRaises(PoleConditionViolated):
            build_manifold(3, _Sine(shift=0.5), GridSpec(1e-6, 1.0, 64))

    def test_positivity(self):
        with self.assertRaises(NonPositiveWarp):
            build_manifold(3, _Sine(), GridSpec(1e-6, 10.0, 256))

    def test_hyperbolic_grid_truncated(self):
        M = build_manifold(3, Hyperbolic(kappa=1.0))
        self.assertAlmostEqual(M.r_max, 325.0)
        self.assertTrue(np.all(np.isfinite(M.w ** (M.n - 1))))

    def test_describe(self):
        M = build_manifold(4, SmoothedCone(slope=0.5))
        d = M.describe()
        self.assertEqual(d["n"], 4)
        self.assertEqual(d["profile"]["kind"], "cone")
        self.assertEqual(d["grid"]["count"], 4096)


class TestCurvature(unittest.TestCase):
    def test_sphere_area(self):
        self.assertAlmostEqual(sphere_area(1), 2 * math.pi)
        self.assertAlmostEqual(sphere_area(2), 4 * math.pi)

    def test_euclidean_flat(self):
        M = build_manifold(3, Euclidean())
        radial, tangential = ricci_eigenvalues(M, M.radii)
        self.assertEqual(float(np.max(np.abs(radial))), 0.0)
        self.assertEqual(float(np.max(np.abs(tangential))), 0.0)

    def test_hyperbolic_constant(self):
        M = build_manifold(3, Hyperbolic(kappa=1.0))
        radial, tangential = ricci_eigenvalues(M, np.array([0.5, 1.0, 2.0]))
        np.testing.assert_allclose(radial, -2.0, rtol=1e-12)
        np.testing.assert_allclose(tangential, -2.0, rtol=1e-10)
        self.assertEqual(ricci_eigenvalues(M, 0.0), (-2.0, -2.0))

    def test_cone_nonnegative(self):
        M = build_manifold(3, SmoothedCone(slope=0.5, smoothing=1.0))
        self.assertEqual(ric_minus(M).sup(), 0.0)

    def test_out_of_grid(self):
        M = build_manifold(3, Euclidean(), GridSpec(1e-6, 100.0, 256))
        with self.assertRaises(OutOfGrid):
            ricci_eigenvalues(M, 200.0)

    def test_tabulated_pole(self):
        r = np.linspace(0.0, 200.0, 401)
        M = build_manifold(3, Tabulated(r, r), GridSpec(1e-3, 100.0, 256))
        with self.assertRaises(PoleEvaluation):
            ricci_eigenvalues(M, 0.0)

    def test_perturbed_finite_differences(self):
        M = build_manifold(3, Perturbed(Euclidean(), amplitude=0.1, width=1.0))
        w, n, h = M.profile.w, M.n, 1e-4
        for r in (0.1, 0.5, 1.0, 2.0, 3.0):
            with self.subTest(r=r):
                lo, mid, hi = (float(w(x)) for x in (r - h, r, r + h))
                dw = (hi - lo) / (2 * h)
                d2w = (hi - 2 * mid + lo) / h**2
                radial, tangential = ricci_eigenvalues(M, r)
                self.assertAlmostEqual(radial, -(n - 1) * d2w / mid, delta=1e-6)
                self.assertAlmostEqual(
                    tangential, -d2w / mid + (n - 2) * (1 - dw**2) / mid**2, delta=1e-6
                )


class TestVolumes(unittest.TestCase):
    def setUp(self):
        self.M = build_manifold(3, Euclidean())

    def test_ball(self):
        V, A = volume_and_area(self.M, 2.0)
        self.assertAlmostEqual(V / (4 * math.pi / 3 * 8), 1.0, places=10)
        self.assertAlmostEqual(A / (4 * math.pi * 4), 1.0, places=12)

    def test_volume_field(self):
        V = volume_field(self.M)
        self.assertAlmostEqual(V(1.0) / (4 * math.pi / 3), 1.0, places=6)
        self.assertAlmostEqual(V(100.0) / (4 * math.pi / 3 * 1e6), 1.0, places=6)

    def test_avr(self):
        self.assertAlmostEqual(asymptotic_volume_ratio(self.M), 4 * math.pi / 3)
        cone = build_manifold(3, SmoothedCone(slope=0.5))
        self.assertAlmostEqual(asymptotic_volume_ratio(cone), math.pi / 3)

    def test_avr_limits(self):
        hyp = build_manifold(3, Hyperbolic())
        self.assertTrue(math.isinf(asymptotic_volume_ratio(hyp)))

    def test_area_is_volume_derivative(self):
        M = build_manifold(3, Perturbed(Euclidean(), amplitude=0.1, width=1.0))
        h = 1e-3
        for r in (0.5, 1.0, 2.0, 5.0):
            with self.subTest(r=r):
                dV = (volume_and_area(M, r + h)[0] - volume_and_area(M, r - h)[0]) / (2 * h)
                self.assertAlmostEqual(volume_and_area(M, r)[1] / dV, 1.0, delta=1e-5)

    def test_tail_mismatch(self):
        M = build_manifold(3, Euclidean().with_tail(c=2.0))
        with self.assertRaises(TailUnresolved):
            asymptotic_volume_ratio(M)


class TestEnvelope(unittest.TestCase):
    def test_euclidean(self):
        env = curvature_envelope(build_manifold(3, Euclidean()))
        self.assertEqual(env.K, 0.0)
        self.assertEqual(env.b0, 0.0)
        self.assertEqual(env.lambda0, 0.0)

    def test_perturbed_envelope(self):
        M = build_manifold(3, Perturbed(Euclidean(), amplitude=0.1, width=1.0))
        env = curvature_envelope(M)
        lam = env.lam.values
        self.assertTrue(np.all(np.diff(lam) <= 0))
        self.assertTrue(np.all((M.n - 1) * lam >= env.ric_minus.values))
        self.assertTrue(env.b0_finite)
        self.assertGreater(env.b0, 0.0)
        self.assertGreater(env.K, 0.0)
        self.assertGreaterEqual(env.alpha, 2.0)
        self.assertAlmostEqual(env.lambda0, 0.6)

    def test_perturbed_envelope_brute_force(self):
        M = build_manifold(3, Perturbed(Euclidean(), amplitude=0.1, width=1.0))
        env = curvature_envelope(M)

        # uniform 10^4-point grid from the pole, independent of the log grid
        r = np.linspace(0.0, 20.0, 10_001)
        radial, tangential = ricci_eigenvalues(M, r)
        q = np.maximum(0.0, -np.minimum(radial, tangential)) / (M.n - 1)
        lam = np.maximum.accumulate(q[::-1])[::-1]
        b0 = trapezoid(lam * r, r)

        alphas = np.arange(2.0, 6.0 * M.n + ALPHA_STEP / 2, ALPHA_STEP)
        pos = q > 0
        Ks = np.array([np.max(q[pos] * (1.0 + r[pos] ** a)) for a in alphas])
        K = Ks.min()
        alpha = alphas[np.flatnonzero(Ks <= K * (1 + 1e-12))[-1]]

        self.assertAlmostEqual(env.b0 / b0, 1.0, delta=0.01)
        self.assertAlmostEqual(env.K / K, 1.0, delta=0.01)
        # α is resolved to one step of the fit grid
        self.assertLessEqual(abs(env.alpha - alpha), ALPHA_STEP)

    def test_hyperbolic_budget_diverges(self):
        M = build_manifold(3, Hyperbolic())
        env = curvature_envelope(M)
        self.assertFalse(env.b0_finite)
        with self.assertRaises(EnvelopeDivergent):
            bishop_gromov_check(M, 1.0, 2.0, env)

    def test_bishop_gromov(self):
        M = build_manifold(3, Perturbed(Euclidean(), amplitude=0.1, width=1.0))
        env = curvature_envelope(M)
        for R in (0.5, 2.0, 10.0):
            self.assertLessEqual(bishop_gromov_check(M, 0.1, R, env), 0.0)


if __name__ == "__main__":
    unittest.main()
