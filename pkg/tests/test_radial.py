"""Tests for the radial inverse, Green kernel, Kato constant and gauge function."""

import math
import os
import sys
import unittest
from dataclasses import replace

import numpy as np
from scipy.integrate import solve_ivp

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from warpbench.errors import BadParameters, Divergent, NotGaugeable, Parabolic
from warpbench.geometry import build_manifold, ric_minus, ricci_eigenvalues
from warpbench.models import GridSpec, RadialField
from warpbench.profiles import Euclidean, Hyperbolic, Perturbed, Scaled, SmoothedCone
from warpbench.radial import (
    conformal_bakry_emery_check,
    energy_identity_check,
    gauge_solve,
    green_pole,
    kato_constant,
    li_yau_check,
    poisson_bounded,
)


def _bumped(amplitude: float = 0.02):
    return build_manifold(3, Perturbed(Euclidean(), amplitude=amplitude, width=1.0))


class TestGreenKernel(unittest.TestCase):
    def setUp(self):
        self.M = build_manifold(3, Euclidean())

    def test_newton_kernel(self):
        kernel = green_pole(self.M)
        r = np.array([0.01, 1.0, 100.0])
        np.testing.assert_allclose(kernel.G(r), 1 / (4 * math.pi * r), rtol=1e-6)
        np.testing.assert_allclose(kernel.dG(r), -1 / (4 * math.pi * r**2), rtol=1e-12)
        self.assertTrue(kernel.nonparabolic)
        self.assertLess(kernel.harmonicity_residual, 1e-6)

    def test_four_dimensional(self):
        M = build_manifold(4, Euclidean())
        kernel = green_pole(M)
        # G = 1/(2·ω_3·r²) with ω_3 = 2π²
        self.assertAlmostEqual(kernel.G(1.0) * 4 * math.pi**2, 1.0, places=6)

    def test_parabolic(self):
        M = build_manifold(3, Euclidean().with_tail(p=0.5))
        with self.assertRaises(Parabolic):
            green_pole(M)

    def test_li_yau(self):
        self.assertAlmostEqual(li_yau_check(self.M), 1 / 3, places=5)

    def test_energy_identity(self):
        energy, bound = energy_identity_check(self.M, 1.0)
        self.assertAlmostEqual(energy * 4 * math.pi, 1.0, places=6)
        self.assertAlmostEqual(bound * math.pi, 1.0, places=6)

    def test_energy_identity_profiles(self):
        profiles = {
            "euclidean": Euclidean(),
            "cone": SmoothedCone(slope=0.5, smoothing=1.0),
            "perturbed": Perturbed(Euclidean(), amplitude=0.02, width=1.0),
            "hyperbolic": Hyperbolic(),
        }
        for name, profile in profiles.items():
            M = build_manifold(3, profile)
            kernel = green_pole(M)
            for r in (0.1, 1.0, 10.0):
                with self.subTest(profile=name, r=r):
                    energy, bound = energy_identity_check(M, r, kernel)
                    self.assertAlmostEqual(energy / float(kernel.G(r)), 1.0, delta=1e-6)
                    self.assertAlmostEqual(bound, 4 * float(kernel.G(r)))


class TestPoisson(unittest.TestCase):
    def setUp(self):
        self.M = build_manifold(3, Euclidean())

    def test_gaussian_source(self):
        h = RadialField.from_function(self.M.radii, lambda r: np.exp(-(r**2)), "h")
        phi, sup_norm = poisson_bounded(self.M, h)
        # φ(0) = ∫ s·h(s) ds and, far out, φ = mass/(4πr) with mass π^{3/2}
        self.assertAlmostEqual(sup_norm, 0.5, places=6)
        self.assertAlmostEqual(phi(10.0) * 40.0 / math.sqrt(math.pi), 1.0, places=6)

    def test_zero_source(self):
        h = RadialField.constant(self.M.radii, 0.0)
        phi, sup_norm = poisson_bounded(self.M, h)
        self.assertEqual(sup_norm, 0.0)
        self.assertEqual(phi.sup(), 0.0)

    def test_negative_source(self):
        h = RadialField.constant(self.M.radii, -1.0)
        with self.assertRaises(BadParameters):
            poisson_bounded(self.M, h)


class TestKato(unittest.TestCase):
    def test_flat(self):
        kato = kato_constant(build_manifold(3, SmoothedCone(slope=0.5)))
        self.assertEqual(kato.k_infty, 0.0)
        self.assertEqual(kato.gamma, 1.0)
        self.assertTrue(kato.gauge_feasible)

    def test_hyperbolic_divergent(self):
        with self.assertRaises(Divergent):
            kato_constant(build_manifold(3, Hyperbolic()))

    def test_pole_value_dominates(self):
        kato = kato_constant(_bumped())
        self.assertGreater(kato.k_infty, 0.0)
        self.assertLess(kato.k_infty, 1.0)
        self.assertAlmostEqual(kato.gamma, 1 / (1 - kato.k_infty))
        self.assertGreaterEqual(kato.k_infty, kato.u.sup())

    def test_double_resolution(self):
        profile = Perturbed(Euclidean(), amplitude=0.02, width=1.0)
        coarse = kato_constant(build_manifold(3, profile)).k_infty
        fine = kato_constant(build_manifold(3, profile, GridSpec().refined())).k_infty
        self.assertAlmostEqual(coarse / fine, 1.0, delta=1e-6)

    def test_nested_quadrature(self):
        M = _bumped()
        n = M.n
        w = M.profile.w

        def negative_part(t):
            radial, tangential = ricci_eigenvalues(M, t)
            return max(0.0, -min(float(radial), float(tangential)))

        # I' = Ric₋·w^{n-1}, J' = I·w^{1-n}; the pole potential is J(∞)
        def rhs(t, y):
            wt = float(w(t))
            return [negative_part(t) * wt ** (n - 1), y[0] * wt ** (1 - n)]

        r0, r1 = 1e-4, 12.0
        rm0 = negative_part(0.0)
        start = [rm0 * r0**n / n, rm0 * r0**2 / (2 * n)]
        sol = solve_ivp(rhs, (r0, r1), start, method="DOP853", rtol=1e-11, atol=1e-14)
        inner, outer = sol.y[0, -1], sol.y[1, -1]
        # past the bump w = r, so the rest of the outer integral is I(r1)/r1
        oracle = outer + inner / r1
        self.assertAlmostEqual(kato_constant(M).k_infty / oracle, 1.0, delta=1e-6)

    def test_scale_invariant(self):
        base = Perturbed(Euclidean(), amplitude=0.02, width=1.0)
        k_infty = kato_constant(build_manifold(3, base)).k_infty
        for s in (0.5, 2.0):
            with self.subTest(s=s):
                M = build_manifold(3, Scaled(base, s), GridSpec().scaled(s))
                self.assertAlmostEqual(kato_constant(M).k_infty / k_infty, 1.0, delta=1e-8)


class TestGauge(unittest.TestCase):
    def setUp(self):
        self.M = _bumped()
        self.kato = kato_constant(self.M)
        self.gauge = gauge_solve(self.M, self.kato)

    def test_sandwich(self):
        phi = self.gauge.phi.values
        self.assertGreaterEqual(phi.min(), 1.0 - 1e-12)
        self.assertLessEqual(phi.max(), self.kato.gamma * (1 + 1e-9))
        self.assertLess(self.gauge.iterations, 1000)
        np.testing.assert_allclose(
            self.gauge.f.values, np.log(phi) / (self.M.n - 2), rtol=1e-12
        )

    def test_matches_shooting(self):
        M = self.M
        n, prof = M.n, M.profile

        def negative_part(r):
            radial, tangential = ricci_eigenvalues(M, r)
            return max(0.0, -min(radial, tangential))

        def rhs(r, y):
            growth = (n - 1) * float(prof.dw(r)) / float(prof.w(r))
            return [y[1], -growth * y[1] - (n - 2) * negative_part(r) * y[0]]

        r0, r1 = 1e-4, 12.0
        start = [1.0, -(n - 2) * negative_part(r0) * r0 / n]
        sol = solve_ivp(rhs, (r0, r1), start, method="DOP853", rtol=1e-10, atol=1e-12)
        psi, dpsi = sol.y[0, -1], sol.y[1, -1]
        # outside the bump ψ = a + b·r^{2-n}, and φ = ψ/a tends to 1
        a = psi + dpsi * r1 / (n - 2)
        self.assertAlmostEqual(self.gauge.phi.values[0] * a, 1.0, delta=1e-4)

    def test_conformal_tensor_nonnegative(self):
        min_eig = conformal_bakry_emery_check(self.M, self.gauge)
        self.assertGreaterEqual(min_eig, -1e-5 * 1.2)

    def test_residual_bound(self):
        bumped = (self.M, self.gauge)
        cone = build_manifold(3, SmoothedCone(slope=0.5, smoothing=1.0))
        for name, (M, gauge) in {"perturbed": bumped, "cone": (cone, gauge_solve(cone))}.items():
            with self.subTest(profile=name):
                bound = 1e-6 * ric_minus(M).sup() * gauge.phi.sup()
                self.assertAlmostEqual(gauge.residual_bound, bound)
                self.assertLessEqual(gauge.residual, bound)
                self.assertTrue(gauge.residual_ok)
                self.assertEqual(gauge.to_dict()["residual_bound"], gauge.residual_bound)

    def test_residual_breach_flagged(self):
        breached = replace(self.gauge, residual=2 * self.gauge.residual_bound + 1e-12)
        self.assertFalse(breached.residual_ok)

    def test_not_gaugeable(self):
        M = _bumped(amplitude=2.0)
        kato = kato_constant(M)
        self.assertFalse(kato.gauge_feasible)
        self.assertTrue(math.isinf(kato.gamma))
        with self.assertRaises(NotGaugeable):
            gauge_solve(M, kato)


if __name__ == "__main__":
    unittest.main()
