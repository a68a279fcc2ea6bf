"""Carver: attenuation law, grid traversal vs brute force, accumulation."""

import numpy as np
import pytest

from evscan.carve import (
    AttenuationMode,
    CarveConfig,
    accumulate,
    attenuate,
    default_prune_threshold,
    prune,
    traverse_ray,
)
from evscan.errors import DomainError, InputError
from evscan.geometry import CameraIntrinsics, EventStream, Ray, VoxelGrid, make_orbit


class TestAttenuate:
    def test_inverse_at_zero(self):
        assert attenuate(AttenuationMode("inverse", 1.0), 0.0) == 1.0

    def test_inverse_at_one(self):
        assert attenuate(AttenuationMode("inverse", 1.0), 1.0) == 0.5

    def test_linear_clamps(self):
        assert attenuate(AttenuationMode("linear", 1.0), 2.0) == 0.0

    def test_none_constant(self):
        assert attenuate(AttenuationMode("none", 0.7), 5.0) == 0.7

    def test_negative_distance(self):
        with pytest.raises(DomainError):
            attenuate(AttenuationMode("inverse"), -0.1)

    def test_inverse_strictly_decreasing(self):
        d = np.linspace(0, 5, 100)
        w = attenuate(AttenuationMode("inverse", 2.0), d)
        assert np.all(np.diff(w) < 0)

    def test_linear_nonnegative_zero_at_r0(self):
        mode = AttenuationMode("linear", 1.5)
        d = np.linspace(0, 3, 50)
        w = attenuate(mode, d)
        assert np.all(w >= 0)
        assert attenuate(mode, 1.5) == 0.0


def brute_force_traverse(grid, origin, direction, t_max, eps=1e-9):
    """Per-voxel slab test; returns (set of voxels, grazing flag)."""
    out = {}
    grazing = False
    nx, ny, nz = grid.dims
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                lo = grid.origin + np.array([ix, iy, iz]) * grid.pitch
                hi = lo + grid.pitch
                t0, t1 = 0.0, t_max
                ok = True
                for k in range(3):
                    if direction[k] == 0.0:
                        if origin[k] < lo[k] or origin[k] > hi[k]:
                            ok = False
                            break
                        if abs(origin[k] - lo[k]) < eps or abs(origin[k] - hi[k]) < eps:
                            grazing = True
                    else:
                        ta = (lo[k] - origin[k]) / direction[k]
                        tb = (hi[k] - origin[k]) / direction[k]
                        if ta > tb:
                            ta, tb = tb, ta
                        t0, t1 = max(t0, ta), min(t1, tb)
                if not ok:
                    continue
                if t1 - t0 > eps:
                    out[grid.linear_index(ix, iy, iz)] = t0
                elif t1 - t0 > -eps:
                    grazing = True
    return out, grazing


class TestTraverseRay:
    def test_axis_aligned_through_4_cube(self):
        grid = VoxelGrid(np.zeros(3), 0.25, (4, 4, 4))
        ray = Ray(np.array([-0.5, 0.375, 0.375]), np.array([1.0, 0, 0]))
        idx, dist = traverse_ray(grid, ray, 10.0)
        assert len(idx) == 4
        expected = [grid.linear_index(i, 1, 1) for i in range(4)]
        assert idx.tolist() == expected
        np.testing.assert_allclose(np.diff(dist), 0.25, atol=1e-12)
        assert abs(dist[0] - 0.5) < 1e-12  # entry at the grid boundary

    def test_miss_is_empty(self):
        grid = VoxelGrid(np.zeros(3), 0.25, (4, 4, 4))
        ray = Ray(np.array([-0.5, 5.0, 0.0]), np.array([1.0, 0, 0]))
        idx, _ = traverse_ray(grid, ray, 10.0)
        assert len(idx) == 0

    def test_origin_inside_starts_at_zero(self):
        grid = VoxelGrid(np.zeros(3), 0.25, (4, 4, 4))
        ray = Ray(np.array([0.51, 0.51, 0.51]), np.array([0.0, 0, 1.0]))
        idx, dist = traverse_ray(grid, ray, 10.0)
        assert dist[0] == 0.0
        assert idx[0] == grid.linear_index(2, 2, 2)

    def test_random_rays_vs_brute_force(self):
        rng = np.random.default_rng(12)
        grid = VoxelGrid(np.array([-0.4, -0.4, -0.4]), 0.1, (8, 8, 8))
        checked = 0
        for _ in range(250):
            o = rng.normal(0, 0.8, 3)
            d = rng.normal(0, 1, 3)
            d /= np.linalg.norm(d)
            t_max = rng.uniform(0.3, 3.0)
            oracle, grazing = brute_force_traverse(grid, o, d, t_max)
            if grazing:
                continue
            checked += 1
            idx, dist = traverse_ray(grid, Ray(o, d), t_max)
            assert sorted(idx.tolist()) == sorted(oracle.keys())
            assert np.all(np.diff(dist) > 0)  # increasing-distance order
            for i, t in zip(idx, dist):
                assert abs(oracle[i] - t) < 1e-9
        assert checked > 200


def tiny_setup():
    cam = CameraIntrinsics(16, 12, 6.0, 6.0, 8.0, 6.0)
    traj = make_orbit(radius=1.0, loops=1.0, duration=2.0, n_keyframes=20, elev_amplitude=0.0)
    return cam, traj


def stream_at(ts, xs, ys, cam):
    n = len(ts)
    return EventStream(np.asarray(ts, float), xs, ys, np.ones(n, np.int8), cam.width, cam.height)


class TestAccumulate:
    def test_zero_events_zero_grid(self):
        cam, traj = tiny_setup()
        ev = EventStream(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), cam.width, cam.height)
        cfg = CarveConfig(grid_dims=(8, 8, 8), grid_origin=np.full(3, -0.2), grid_pitch=0.05)
        w, skipped = accumulate(ev, traj, cam, cfg)
        assert skipped == 0
        assert np.all(w.cells == 0)

    def test_single_event_mode_none(self):
        cam, traj = tiny_setup()
        ev = stream_at([0.7], [8], [6], cam)
        cfg = CarveConfig(grid_dims=(8, 8, 8), grid_origin=np.full(3, -0.2), grid_pitch=0.05,
                          attenuation=AttenuationMode("none", 1.0))
        w, _ = accumulate(ev, traj, cam, cfg)
        touched = w.cells[w.cells > 0]
        assert len(touched) > 0
        np.testing.assert_array_equal(touched, 1.0)

    def test_double_stream_doubles(self):
        cam, traj = tiny_setup()
        ev1 = stream_at([0.3, 0.9], [8, 7], [6, 6], cam)
        ev2 = stream_at([0.3, 0.3, 0.9, 0.9], [8, 8, 7, 7], [6, 6, 6, 6], cam)
        for mode in ("none", "inverse"):
            cfg = CarveConfig(grid_dims=(8, 8, 8), grid_origin=np.full(3, -0.2), grid_pitch=0.05,
                              attenuation=AttenuationMode(mode))
            w1, _ = accumulate(ev1, traj, cam, cfg)
            w2, _ = accumulate(ev2, traj, cam, cfg)
            np.testing.assert_allclose(w2.cells, 2.0 * w1.cells, rtol=1e-12, atol=0)

    def test_additivity_over_concatenation(self):
        cam, traj = tiny_setup()
        rng = np.random.default_rng(5)
        ta = np.sort(rng.uniform(0, 2, 30))
        tb = np.sort(rng.uniform(0, 2, 20))
        xa, ya = rng.integers(0, 16, 30), rng.integers(0, 12, 30)
        xb, yb = rng.integers(0, 16, 20), rng.integers(0, 12, 20)
        cfg = CarveConfig(grid_dims=(8, 8, 8), grid_origin=np.full(3, -0.2), grid_pitch=0.05,
                          attenuation=AttenuationMode("inverse"))
        wa, _ = accumulate(stream_at(ta, xa, ya, cam), traj, cam, cfg)
        wb, _ = accumulate(stream_at(tb, xb, yb, cam), traj, cam, cfg)
        tall = np.concatenate([ta, tb])
        order = np.argsort(tall, kind="stable")
        merged = stream_at(tall[order], np.concatenate([xa, xb])[order], np.concatenate([ya, yb])[order], cam)
        wm, _ = accumulate(merged, traj, cam, cfg)
        np.testing.assert_allclose(wm.cells, wa.cells + wb.cells, rtol=1e-9, atol=1e-12)

    def test_out_of_range_events(self):
        cam, traj = tiny_setup()
        cfg = CarveConfig(grid_dims=(8, 8, 8), grid_origin=np.full(3, -0.2), grid_pitch=0.05)
        # all events far outside the trajectory range: skip fraction 100% > 1%
        ev = stream_at([5.0, 6.0], [8, 8], [6, 6], cam)
        with pytest.raises(InputError):
            accumulate(ev, traj, cam, cfg)


class TestPrune:
    def test_all_zero_weights_fully_occupied(self):
        grid = VoxelGrid(np.zeros(3), 0.1, (4, 4, 4))
        occ = prune(grid, tau=0.5)
        assert np.all(occ.cells == 1.0)

    def test_all_above_tau_empty(self):
        grid = VoxelGrid(np.zeros(3), 0.1, (4, 4, 4), np.full(64, 2.0))
        occ = prune(grid, tau=0.5)
        assert np.all(occ.cells == 0.0)

    def test_region_mask_applied(self):
        grid = VoxelGrid(np.zeros(3), 0.1, (4, 4, 4))
        region = np.zeros(64, dtype=bool)
        region[:8] = True
        occ = prune(grid, tau=0.5, region_mask=region)
        assert occ.cells.sum() == 8

    def test_tau_must_be_positive(self):
        grid = VoxelGrid(np.zeros(3), 0.1, (4, 4, 4))
        with pytest.raises(InputError):
            prune(grid, tau=0.0)

    def test_default_threshold_scale_free(self):
        grid = VoxelGrid(np.zeros(3), 0.1, (4, 4, 4), np.arange(64, dtype=float))
        t1 = default_prune_threshold(grid)
        grid2 = grid.like(grid.cells * 7.0)
        assert abs(default_prune_threshold(grid2) - 7.0 * t1) < 1e-12
