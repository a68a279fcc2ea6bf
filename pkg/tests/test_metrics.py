"""Metric oracles: MPJPE hand cases, pelvis alignment, Chamfer Distance."""

import numpy as np
import pytest

from evscan.errors import InputError
from evscan.geometry import TriMesh
from evscan.metrics import (
    aggregate,
    chamfer_distance,
    chamfer_distance_points,
    mpjpe,
    pel_align,
    pel_mpjpe,
    rms_from_cd,
)


class TestMpjpe:
    def test_zero_on_equal(self):
        j = np.random.default_rng(0).normal(size=(24, 3))
        assert mpjpe(j, j) == 0.0

    def test_3_4_5(self):
        gt = np.zeros((1, 3))
        est = np.array([[0.003, 0.004, 0.0]])
        assert abs(mpjpe(est, gt) - 5.0) < 1e-12

    def test_mean_of_two(self):
        gt = np.zeros((2, 3))
        est = np.array([[0.001, 0, 0], [0.003, 0, 0]])
        assert abs(mpjpe(est, gt) - 2.0) < 1e-12

    def test_count_mismatch(self):
        with pytest.raises(InputError):
            mpjpe(np.zeros((2, 3)), np.zeros((3, 3)))

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(24, 3)), rng.normal(size=(24, 3))
        assert abs(mpjpe(a, b) - mpjpe(b, a)) < 1e-12


class TestPelAlign:
    def test_pelvis_at_origin(self):
        j = np.random.default_rng(2).normal(size=(24, 3))
        aligned = pel_align(j)
        np.testing.assert_array_equal(aligned[0], np.zeros(3))

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        est, gt = rng.normal(size=(24, 3)), rng.normal(size=(24, 3))
        shifted = est + np.array([1.0, -2.0, 0.5])
        assert abs(pel_mpjpe(est, gt) - pel_mpjpe(shifted, gt)) < 1e-9

    def test_constant_offset_gives_zero(self):
        gt = np.random.default_rng(4).normal(size=(24, 3))
        est = gt + np.array([0.1, 0.2, 0.3])
        assert pel_mpjpe(est, gt) < 1e-12


def brute_force_cd(X, Y):
    d_xy = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
    return d_xy.min(1).mean() + d_xy.min(0).mean()


class TestChamferDistance:
    def test_brute_force_agreement(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(200, 3))
        Y = rng.normal(size=(200, 3))
        assert abs(chamfer_distance_points(X, Y) - brute_force_cd(X, Y)) < 1e-12

    def test_symmetric(self):
        rng = np.random.default_rng(6)
        X, Y = rng.normal(size=(100, 3)), rng.normal(size=(150, 3))
        assert abs(chamfer_distance_points(X, Y) - chamfer_distance_points(Y, X)) < 1e-12

    def test_identical_meshes_zero(self):
        tri = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]), np.array([[0, 1, 2]]))
        assert chamfer_distance(tri, tri, n=1000, seed=3) == 0.0

    def test_parallel_planes(self):
        # two parallel squares 1 mm apart: each direction contributes ~1 mm^2.
        # The square must be small enough that the nearest-sample spacing
        # (~side/sqrt(pi*n)) is negligible against the 1 mm gap.
        def square(z):
            s = 0.1
            v = np.array([[0, 0, z], [s, 0, z], [s, s, z], [0, s, z]], dtype=float)
            return TriMesh(v, np.array([[0, 1, 2], [0, 2, 3]]))

        cd = chamfer_distance(square(0.0), square(0.001), n=200_000, seed=7)
        assert abs(cd - 2.0) < 0.05  # mm^2

    def test_empty_mesh_rejected(self):
        tri = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]), np.array([[0, 1, 2]]))
        with pytest.raises(InputError):
            chamfer_distance(TriMesh.empty(), tri)

    def test_rms_conversion(self):
        assert abs(rms_from_cd(2.0) - 1.0) < 1e-12


class TestAggregate:
    def test_mean_of_sequences(self):
        per_seq = [{"pel_mpjpe_mm": 10.0, "cd_mm2": 4.0}, {"pel_mpjpe_mm": 20.0, "cd_mm2": 8.0}]
        out = aggregate(per_seq)
        assert out["pel_mpjpe_mm"] == 15.0
        assert out["cd_mm2"] == 6.0
        assert out["n_sequences"] == 2

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            aggregate([])
