"""Tests for eikonal distances, off-center balls, Ahlfors regularity, (VC) and the field cache."""

import math
import os
import sys
import tempfile
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from warpbench.errors import BadParameters, BallExitsGrid, MeshTooCoarse
from warpbench.geometry import build_manifold
from warpbench.ledger import covering_bound
from warpbench.models import AhlforsReport, MeshSpec
from warpbench.offcenter import (
    FieldCache,
    ahlfors_check,
    ball_volume,
    ball_volume_offcenter,
    covering_count_empirical,
    distance_field,
    eikonal_convergence_order,
    mesh_for_ball,
    vc_check,
)
from warpbench.offcenter.cache import decode_grid, encode_grid
from warpbench.profiles import Euclidean

BALL = 4 * math.pi / 3


def _law_of_cosines(r0):
    def exact(r, psi):
        return np.sqrt(r**2 + r0**2 - 2 * r * r0 * np.cos(psi))

    return exact


class TestEikonal(unittest.TestCase):
    def setUp(self):
        self.M = build_manifold(3, Euclidean())

    def test_mesh_window(self):
        mesh = mesh_for_ball(self.M, 2.0, 1.0, 256, 128)
        self.assertAlmostEqual(mesh.r_lo, 0.75)
        self.assertAlmostEqual(mesh.r_hi, 3.25)
        self.assertAlmostEqual(mesh.psi_max, 1.25 / 0.75)
        self.assertEqual(mesh_for_ball(self.M, 0.5, 1.0).psi_max, math.pi)

    def test_flat_distance(self):
        mesh = mesh_for_ball(self.M, 2.0, 1.0, 256, 128)
        D = distance_field(self.M, 2.0, mesh)
        r, psi = np.meshgrid(D.r, D.psi, indexing="ij")
        exact = _law_of_cosines(2.0)(r, psi)
        err = np.abs(D.d - exact)[exact <= 1.25]
        self.assertLess(float(err.mean()), 0.03)
        self.assertLess(float(err.max()), 0.08)
        # inside the seed disc the initial distance is exact on flat space
        seed = exact <= 0.9 * mesh.source_radius
        np.testing.assert_allclose(D.d[seed], exact[seed], atol=1e-12)

    def test_convergence_order(self):
        mesh = mesh_for_ball(self.M, 2.0, 1.0, 256, 128)
        order = eikonal_convergence_order(self.M, 2.0, mesh, exact=_law_of_cosines(2.0))
        self.assertGreater(order, 0.5)

    def test_mesh_too_coarse(self):
        with self.assertRaises(MeshTooCoarse):
            distance_field(self.M, 2.0, mesh_for_ball(self.M, 2.0, 1.0, 64, 32))

    def test_source_range(self):
        with self.assertRaises(BadParameters):
            distance_field(self.M, -1.0)


class TestBallVolumes(unittest.TestCase):
    def setUp(self):
        self.M = build_manifold(3, Euclidean())

    def test_pole_ball(self):
        self.assertAlmostEqual(ball_volume(self.M, 0.0, 1.0) / BALL, 1.0, places=10)

    def test_offcenter_ball(self):
        vol = ball_volume(self.M, 2.0, 1.0)
        self.assertAlmostEqual(vol / BALL, 1.0, delta=0.05)

    def test_ball_exits_mesh(self):
        D = distance_field(self.M, 2.0, mesh_for_ball(self.M, 2.0, 0.5, 256, 128))
        with self.assertRaises(BallExitsGrid):
            ball_volume_offcenter(self.M, D, 1.0)

    def test_ahlfors(self):
        report = ahlfors_check(self.M, centers=(0.0, 2.0), radii=(0.5, 1.0), n_r=256, n_psi=128)
        self.assertTrue(report.ahlfors_ok)
        self.assertEqual(len(report.samples), 4)
        self.assertLess(report.spread, 1.25)
        self.assertAlmostEqual(report.V0_emp / BALL, 1.0, delta=0.05)

    def test_vc(self):
        report = vc_check(self.M, radii=(1.0, 2.0), n_r=256, n_psi=128)
        self.assertTrue(report.bounded)
        for _, q in report.ratios:
            self.assertAlmostEqual(q / 8.0, 1.0, delta=0.1)

    def test_covering(self):
        ahlfors = ahlfors_check(self.M, centers=(0.0, 2.0), radii=(0.5, 1.0), n_r=256, n_psi=128)
        count = covering_count_empirical(self.M, 1.0, 2.0, 0.25, ahlfors)
        self.assertGreater(count, 0)
        self.assertLessEqual(count, covering_bound(ahlfors.v0_emp, ahlfors.V0_emp, 0.25, 2.0, 3))

    def test_covering_uses_empirical_constants(self):
        # V0/v0 = 2 gives 9483 balls; pole-centred flat ratios would give 4570
        ahlfors = AhlforsReport(v0_emp=BALL, V0_emp=2 * BALL, samples=[], spread_limit=1e3)
        with self.assertLogs("warpbench.offcenter.volumes", level="INFO") as logs:
            covering_count_empirical(self.M, 1.0, 2.0, 0.25, ahlfors)
        self.assertTrue(any("formula bound 9483 " in line for line in logs.output))

    def test_covering_parameters(self):
        with self.assertRaises(BadParameters):
            covering_count_empirical(self.M, 1.0, 2.0, 0.3)


class TestFieldCache(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.cache = FieldCache(os.path.join(self.tmp.name, "fields.db"))
        self.M = build_manifold(3, Euclidean())
        self.mesh = mesh_for_ball(self.M, 2.0, 0.5, 256, 128)

    def tearDown(self):
        self.cache.close()
        self.tmp.cleanup()

    def test_hit(self):
        first = distance_field(self.M, 2.0, self.mesh, self.cache)
        self.assertEqual(self.cache.count(), 1)
        second = distance_field(self.M, 2.0, self.mesh, self.cache)
        np.testing.assert_array_equal(first.d, second.d)
        self.assertEqual(self.cache.count(), 1)

    def test_key_includes_mesh(self):
        distance_field(self.M, 2.0, self.mesh, self.cache)
        other = MeshSpec(r_hi=4.0, n_r=256, n_psi=128, source_radius=0.15)
        self.assertIsNone(self.cache.get(self.M.profile.fingerprint(), 2.0, other))

    def test_corrupt_entry_discarded(self):
        fp = self.M.profile.fingerprint()
        self.cache.put(fp, 2.0, self.mesh, np.zeros((256, 128)))
        self.cache._conn.execute("UPDATE distance_fields SET grid = ?", (b"junk",))
        self.cache._conn.commit()
        self.assertIsNone(self.cache.get(fp, 2.0, self.mesh))
        self.assertEqual(self.cache.count(), 0)

    def test_grid_encoding(self):
        d = np.arange(12, dtype=np.float64).reshape(3, 4)
        blob = encode_grid(d, "abcdef0123456789")
        out, fp = decode_grid(blob)
        np.testing.assert_array_equal(out, d)
        self.assertEqual(fp, "abcdef0123456789")
        with self.assertRaises(ValueError):
            decode_grid(blob[:-8])


if __name__ == "__main__":
    unittest.main()
